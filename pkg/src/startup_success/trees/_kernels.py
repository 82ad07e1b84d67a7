"""Compiled inner loops: histogram accumulation, split scanning, traversal.

Histograms carry three channels per bin. For boosting they are
(sum g, sum h, count); for Gini trees (weighted positives, weighted
negatives, count). The missing bucket of every feature lives at the last
bin index.
"""

import numpy as np
from numba import njit

GRADIENT = 0
GINI = 1

# a candidate must beat the incumbent by this relative margin to replace it
TIE_RTOL = 1e-9

THRESHOLD_ALL = np.finfo(np.float64).max


@njit(nogil=True, cache=True)
def fill_histograms(binned, rows, a, b, feats, out):
    """Accumulate (a, b, count) per bin for each feature in ``feats``."""
    for fi in range(feats.shape[0]):
        f = feats[fi]
        col = binned[f]
        hist = out[f]
        hist[:, :] = 0.0
        for k in range(rows.shape[0]):
            r = rows[k]
            j = col[r]
            hist[j, 0] += a[r]
            hist[j, 1] += b[r]
            hist[j, 2] += 1.0


@njit(nogil=True, cache=True)
def node_score(a, b, criterion, lam):
    if criterion == GRADIENT:
        return a * a / (b + lam)
    w = a + b
    return -2.0 * a * b / w


@njit(nogil=True, cache=True)
def _beats(gain, best):
    return gain > best + TIE_RTOL * max(1.0, abs(best))


@njit(nogil=True, cache=True)
def scan_splits(hist, n_present_bins, feats, criterion, lam, gamma,
                min_child_weight, min_samples_leaf):
    """Best (gain, feature, bin, default_left) over all candidates.

    Candidates run over features ascending, bins ascending, default-left
    before default-right. Bin ``n_present_bins[f] - 1`` sends every present
    value left, so it only makes sense with the missing bucket going right.
    Returns feature -1 when nothing beats zero gain.
    """
    best_gain = 0.0
    best_f = -1
    best_b = -1
    best_dl = True
    miss_idx = hist.shape[1] - 1
    for fi in range(feats.shape[0]):
        f = feats[fi]
        nb = n_present_bins[f]
        h = hist[f]
        a_m = h[miss_idx, 0]
        b_m = h[miss_idx, 1]
        c_m = h[miss_idx, 2]
        a_tot = a_m
        b_tot = b_m
        c_tot = c_m
        for j in range(nb):
            a_tot += h[j, 0]
            b_tot += h[j, 1]
            c_tot += h[j, 2]
        if c_tot < 2:
            continue
        parent = node_score(a_tot, b_tot, criterion, lam)
        scale = 0.5 if criterion == GRADIENT else 1.0
        a_l = 0.0
        b_l = 0.0
        c_l = 0.0
        for j in range(nb):
            a_l += h[j, 0]
            b_l += h[j, 1]
            c_l += h[j, 2]
            for dl in (True, False):
                if dl:
                    al = a_l + a_m
                    bl = b_l + b_m
                    cl = c_l + c_m
                else:
                    al = a_l
                    bl = b_l
                    cl = c_l
                ar = a_tot - al
                br = b_tot - bl
                cr = c_tot - cl
                if cl < min_samples_leaf or cr < min_samples_leaf:
                    continue
                if criterion == GRADIENT:
                    if bl < min_child_weight or br < min_child_weight:
                        continue
                    if bl + lam <= 0.0 or br + lam <= 0.0:
                        continue
                elif bl + al <= 0.0 or br + ar <= 0.0:
                    continue
                gain = scale * (node_score(al, bl, criterion, lam)
                                + node_score(ar, br, criterion, lam) - parent) - gamma
                if _beats(gain, best_gain):
                    best_gain = gain
                    best_f = f
                    best_b = j
                    best_dl = dl
    return best_gain, best_f, best_b, best_dl


@njit(nogil=True, cache=True)
def go_left_mask(binned_col, rows, bin_idx, default_left, miss_idx):
    out = np.empty(rows.shape[0], dtype=np.bool_)
    for k in range(rows.shape[0]):
        j = binned_col[rows[k]]
        if j == miss_idx:
            out[k] = default_left
        else:
            out[k] = j <= bin_idx
    return out


@njit(nogil=True, cache=True)
def predict_trees(X, feature, threshold, default_left, left, right, value,
                  offsets, out_per_tree):
    """Leaf value of every tree for every row: shape (n_rows, n_trees)."""
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    for i in range(n):
        for t in range(n_trees):
            base = offsets[t]
            node = 0
            while feature[base + node] >= 0:
                k = base + node
                x = X[i, feature[k]]
                if np.isnan(x):
                    node = left[k] if default_left[k] else right[k]
                elif x <= threshold[k]:
                    node = left[k]
                else:
                    node = right[k]
            out_per_tree[i, t] = value[base + node]


@njit(nogil=True, cache=True)
def predict_sum(X, feature, threshold, default_left, left, right, value, offsets, out):
    """Sum of leaf values over trees, accumulated in tree order."""
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    for i in range(n):
        s = 0.0
        for t in range(n_trees):
            base = offsets[t]
            node = 0
            while feature[base + node] >= 0:
                k = base + node
                x = X[i, feature[k]]
                if np.isnan(x):
                    node = left[k] if default_left[k] else right[k]
                elif x <= threshold[k]:
                    node = left[k]
                else:
                    node = right[k]
            s += value[base + node]
        out[i] = s
