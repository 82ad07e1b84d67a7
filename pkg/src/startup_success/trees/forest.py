"""Weighted-Gini CART trees and bagged random forests."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from .binning import BinMapper
from .ensemble import TreeEnsemble
from .grower import TreeGrower


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 133
    max_depth: int | None = 63
    min_samples_leaf: int = 1
    n_bins: int = 255
    bootstrap: bool = True
    max_features: str | int | None = "sqrt"
    class_weighting: bool = False
    seed: int = 0
    n_threads: int = field(default=1, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("n_threads")
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


CART_DEFAULTS = ForestParams(n_estimators=1, max_depth=None, bootstrap=False, max_features=None)


def _resolve_max_features(spec, m: int) -> int:
    if spec is None:
        return m
    if spec == "sqrt":
        return max(1, int(np.sqrt(m)))
    k = int(spec)
    if not 1 <= k <= m:
        raise ValueError("max_features out of range")
    return k


def _class_mass(dataset, params, class_weights):
    from ..resample import class_weights as _cw

    w = dataset.w.astype(float).copy()
    if params.class_weighting:
        if class_weights is None:
            class_weights = _cw(dataset.y)
        w *= np.where(dataset.y == 1, class_weights[0], class_weights[1])
    pos = np.where(dataset.y == 1, w, 0.0)
    neg = np.where(dataset.y == 1, 0.0, w)
    return pos, neg


def train_forest(dataset, params: ForestParams = ForestParams(), *, class_weights=None) -> TreeEnsemble:
    """Bagged Gini trees; the forest averages leaf positive fractions.

    Bootstrap resampling is carried as integer row multiplicities, so the
    trees see weights rather than duplicated rows.
    """
    pos, neg = _class_mass(dataset, params, class_weights)
    mapper = BinMapper.fit(dataset.X, params.n_bins)
    binned = mapper.transform(dataset.X)
    n, m = dataset.X.shape
    k = _resolve_max_features(params.max_features, m)
    rng = np.random.default_rng(params.seed)
    kind = "cart" if params.n_estimators == 1 and not params.bootstrap and k == m else "forest"
    model = TreeEnsemble(kind, [], feature_names=dataset.feature_names, params=params.to_dict())

    def sampler():
        return np.sort(rng.choice(m, size=k, replace=False)).astype(np.int64)

    grower = TreeGrower(binned, mapper, criterion=K.GINI, min_samples_leaf=params.min_samples_leaf,
                        max_depth=params.max_depth, growth="level",
                        feature_sampler=sampler if k < m else None, n_threads=params.n_threads)
    try:
        for _ in range(params.n_estimators):
            if params.bootstrap:
                mult = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(float)
                rows = np.flatnonzero(mult).astype(np.int64)
                a, b = pos * mult, neg * mult
            else:
                rows = np.arange(n, dtype=np.int64)
                a, b = pos, neg
            tree, _ = grower.grow(rows, a, b)
            model.append(tree)
    finally:
        grower.close()
    return model


def train_cart(dataset, params: ForestParams = CART_DEFAULTS, *, class_weights=None) -> TreeEnsemble:
    """Single weighted-Gini tree on all rows and all features."""
    from dataclasses import replace

    params = replace(params, n_estimators=1, bootstrap=False, max_features=None)
    return train_forest(dataset, params, class_weights=class_weights)
