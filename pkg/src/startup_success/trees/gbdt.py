"""Second-order gradient boosting on logistic loss with learned missing directions."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _kernels as K
from .binning import BinMapper, Histograms
from .ensemble import TreeEnsemble, sigmoid
from .grower import Split, TreeGrower


@dataclass(frozen=True)
class BoostParams:
    n_estimators: int = 100
    max_depth: int | None = 6
    max_leaves: int = 31
    learning_rate: float = 0.1
    lambda_l2: float = 1.0
    gamma_min_gain: float = 0.0
    min_child_weight: float = 1.0
    min_samples_leaf: int = 1
    n_bins: int = 255
    growth: str = "level"
    goss: tuple[float, float] | None = None
    class_weighting: bool = False
    seed: int = 0
    n_threads: int = field(default=1, compare=False)

    def __post_init__(self):
        if self.n_estimators < 0:
            raise ValueError("n_estimators must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.lambda_l2 < 0 or self.gamma_min_gain < 0:
            raise ValueError("lambda_l2 and gamma_min_gain must be >= 0")
        if self.growth not in ("level", "leaf"):
            raise ValueError("growth must be 'level' or 'leaf'")
        if self.goss is not None:
            a, b = self.goss
            if not (0 <= a <= 1 and 0 < b <= 1 and a + b <= 1):
                raise ValueError("goss rates need 0 <= a, 0 < b and a + b <= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("n_threads")
        d["goss"] = list(self.goss) if self.goss is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BoostParams":
        d = dict(d)
        if d.get("goss") is not None:
            d["goss"] = tuple(d["goss"])
        return cls(**d)


XGB_PRESET = BoostParams(n_estimators=180, max_depth=11, growth="level")
LGBM_PRESET = BoostParams(n_estimators=355, max_depth=8, max_leaves=31, growth="leaf")


def preset(name: str, **overrides) -> BoostParams:
    base = {"gbdt-xgb": XGB_PRESET, "xgb": XGB_PRESET,
            "gbdt-lgbm": LGBM_PRESET, "lgbm": LGBM_PRESET}[name]
    return replace(base, **overrides)


def split_gain(G_L: float, H_L: float, G_R: float, H_R: float, lam: float = 1.0,
               gamma: float = 0.0) -> float:
    """Loss reduction of splitting a node into (G_L, H_L) and (G_R, H_R)."""
    G, H = G_L + G_R, H_L + H_R
    return 0.5 * (G_L ** 2 / (H_L + lam) + G_R ** 2 / (H_R + lam) - G ** 2 / (H + lam)) - gamma


def logistic_grad_hess(y, raw, w):
    p = sigmoid(raw)
    return w * (p - y), w * p * (1.0 - p)


def weighted_logloss(y, raw, w) -> float:
    # log(1 + e^z) - y z, computed stably
    loss = np.logaddexp(0.0, raw) - y * raw
    return float(np.sum(w * loss) / np.sum(w))


def best_split(rows, grad, hess, hist: Histograms, params: BoostParams) -> Split | None:
    """Best sparsity-aware split of the rows at one node, or None."""
    grower = TreeGrower(hist.binned, hist.mapper, criterion=K.GRADIENT,
                        lam=params.lambda_l2, gamma=params.gamma_min_gain,
                        min_child_weight=params.min_child_weight,
                        min_samples_leaf=params.min_samples_leaf)
    return grower.find_split(np.asarray(rows, dtype=np.int64),
                             np.ascontiguousarray(grad, dtype=float),
                             np.ascontiguousarray(hess, dtype=float))


def _goss_rows(grad, hess, top_rate, other_rate, rng):
    n = grad.shape[0]
    n_top = int(top_rate * n)
    n_other = int(other_rate * n)
    order = np.argsort(-np.abs(grad), kind="stable")
    top = order[:n_top]
    rest = order[n_top:]
    n_other = min(n_other, rest.shape[0])
    picked = rng.choice(rest, size=n_other, replace=False) if n_other else rest[:0]
    grad = grad.copy()
    hess = hess.copy()
    amp = (1.0 - top_rate) / other_rate
    grad[picked] *= amp
    hess[picked] *= amp
    return np.sort(np.concatenate([top, picked])), grad, hess


def train_gbdt(dataset, params: BoostParams = BoostParams(), *, class_weights=None) -> TreeEnsemble:
    """Fit a boosted ensemble on a :class:`~startup_success.features.Dataset`.

    Missing values stay NaN; every split learns where they go. With
    ``params.class_weighting`` sample weights are multiplied by
    inverse-frequency class weights before gradients are formed.
    """
    from ..resample import class_weights as _cw

    X, y = dataset.X, dataset.y.astype(float)
    w = dataset.w.astype(float).copy()
    if params.class_weighting:
        if class_weights is None:
            class_weights = _cw(dataset.y)
        w_pos, w_neg = class_weights
        w *= np.where(dataset.y == 1, w_pos, w_neg)

    pos_rate = float(np.sum(w * y) / np.sum(w))
    pos_rate = min(max(pos_rate, 1e-12), 1.0 - 1e-12)
    base = float(np.log(pos_rate / (1.0 - pos_rate)))
    model = TreeEnsemble("gbdt", [], base_score=base, learning_rate=params.learning_rate,
                         feature_names=dataset.feature_names, params=params.to_dict(),
                         growth=params.growth)
    raw = np.full(len(y), base)
    model.history.append(weighted_logloss(y, raw, w))
    if np.all(y == y[0]) or len(y) < 2:
        return model

    mapper = BinMapper.fit(X, params.n_bins)
    binned = mapper.transform(X)
    grower = TreeGrower(binned, mapper, criterion=K.GRADIENT, lam=params.lambda_l2,
                        gamma=params.gamma_min_gain, min_child_weight=params.min_child_weight,
                        min_samples_leaf=params.min_samples_leaf,
                        max_depth=params.max_depth,
                        max_leaves=params.max_leaves if params.growth == "leaf" else None,
                        growth=params.growth, n_threads=params.n_threads)
    rng = np.random.default_rng(params.seed)
    all_rows = np.arange(len(y), dtype=np.int64)
    try:
        for _ in range(params.n_estimators):
            g, h = logistic_grad_hess(y, raw, w)
            rows = all_rows
            if params.goss is not None:
                rows, g, h = _goss_rows(g, h, params.goss[0], params.goss[1], rng)
            tree, leaf_rows = grower.grow(rows, g, h)
            model.append(tree)
            if len(rows) == len(y):
                for leaf, r in leaf_rows.items():
                    raw[r] += params.learning_rate * tree.value[leaf]
            else:
                raw += params.learning_rate * _single_tree_sum(model, tree, X)
            model.history.append(weighted_logloss(y, raw, w))
    finally:
        grower.close()
    return model


def _single_tree_sum(model, tree, X):
    one = TreeEnsemble("forest", [tree], feature_names=model.feature_names)
    return one.tree_sum(X)
