"""Independent slow reference implementations used as test oracles."""

import numpy as np

INF = np.finfo(np.float64).max
TIE_RTOL = 1e-9


def exhaustive_split(X, g, h, lam=1.0, gamma=0.0, min_child_weight=1.0, min_samples_leaf=1):
    """Best sparsity-aware split by direct enumeration on raw values.

    Candidates: every distinct present value v as ``x <= v`` (the largest
    value meaning "all present rows left"), combined with missing rows going
    left or right. Enumeration order is feature, threshold, then
    missing-left before missing-right; a later candidate must beat the
    incumbent by a relative 1e-9 to replace it.
    Returns (gain, feature, threshold, default_left) or None.
    """
    n, m = X.shape

    def score(G, H):
        return G * G / (H + lam)

    G, H = g.sum(), h.sum()
    best = (0.0, -1, 0.0, True)
    for f in range(m):
        col = X[:, f]
        miss = np.isnan(col)
        vals = np.unique(col[~miss])
        if n < 2:
            continue
        for v in vals:
            present_left = ~miss & (col <= v)
            for dl in (True, False):
                left = present_left | (miss & dl)
                cl = int(left.sum())
                cr = n - cl
                if cl < min_samples_leaf or cr < min_samples_leaf:
                    continue
                GL, HL = g[left].sum(), h[left].sum()
                GR, HR = G - GL, H - HL
                if HL < min_child_weight or HR < min_child_weight:
                    continue
                gain = 0.5 * (score(GL, HL) + score(GR, HR) - score(G, H)) - gamma
                if gain > best[0] + TIE_RTOL * max(1.0, abs(best[0])):
                    thr = INF if v == vals[-1] else float(v)
                    best = (gain, f, thr, dl)
    return None if best[1] < 0 else best


def route_left(x, threshold, default_left):
    return default_left if np.isnan(x) else x <= threshold


def tree_predict(tree, x):
    i = 0
    while tree.feature[i] >= 0:
        i = tree.left[i] if route_left(x[tree.feature[i]], tree.threshold[i],
                                       tree.default_left[i]) else tree.right[i]
    return tree.value[i]


def gradient_check(fun, theta, rng, n_params=25, h=1e-6):
    """Max relative error between ``fun``'s analytic gradient and central
    differences on ``n_params`` randomly chosen coordinates."""
    _, grad = fun(theta)
    idx = rng.choice(theta.size, size=min(n_params, theta.size), replace=False)
    worst = 0.0
    for i in idx:
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        num = (fun(tp)[0] - fun(tm)[0]) / (2 * h)
        den = max(abs(num), abs(grad[i]), 1e-6)
        worst = max(worst, abs(num - grad[i]) / den)
    return worst, len(idx)
