"""Class-imbalance handling: inverse-frequency weights, median imputation, SMOTE."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np
from numba import njit

from .features import Dataset

logger = logging.getLogger(__name__)


class Strategy(enum.Enum):
    NONE = "none"
    SMOTE = "smote"
    WEIGHT = "weight"


@dataclass(frozen=True)
class ImbalancePlan:
    strategy: Strategy = Strategy.NONE
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")


def class_weights(labels) -> tuple[float, float]:
    """``(w_pos, w_neg)`` with ``w_c = n / (2 n_c)``."""
    labels = np.asarray(labels)
    n = labels.size
    n_pos = int(np.sum(labels == 1))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("class weights need both classes present")
    return n / (2.0 * n_pos), n / (2.0 * n_neg)


def weight_adjusted(ds: Dataset) -> Dataset:
    w_pos, w_neg = class_weights(ds.y)
    return ds.with_weights(ds.w * np.where(ds.y == 1, w_pos, w_neg))


def impute_median(ds: Dataset) -> tuple[Dataset, np.ndarray]:
    """Replace NaN with column medians of ``ds``; returns the median vector.

    Apply the returned vector to test data with :func:`apply_imputation`.
    An all-missing column is filled with 0.
    """
    if len(ds) == 0:
        raise ValueError("cannot impute an empty dataset")
    X = ds.X
    med = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        col = X[:, j]
        present = col[~np.isnan(col)]
        if present.size == 0:
            logger.warning("column %s is entirely missing; imputing 0", ds.feature_names[j])
        else:
            med[j] = np.median(present)
    out = Dataset(apply_imputation(X, med), ds.y, ds.w, ds.feature_names, ds.company_ids,
                  ds.window_index, ds.t_s, ds.t_f)
    return out, med


def apply_imputation(X, medians) -> np.ndarray:
    X = np.array(X, dtype=float, copy=True)
    rows, cols = np.nonzero(np.isnan(X))
    X[rows, cols] = np.asarray(medians)[cols]
    return X


@njit(cache=True)
def _top_k(d, start, k, out):
    # scanning columns in ascending order and replacing only on a strictly
    # smaller distance keeps the lower index among equals
    for r in range(d.shape[0]):
        best_d = np.full(k, np.inf)
        best_i = np.full(k, -1, dtype=np.int64)
        for j in range(d.shape[1]):
            if j == start + r:
                continue
            v = d[r, j]
            if v < best_d[k - 1] or best_i[k - 1] < 0:
                p = k - 1
                while p > 0 and (v < best_d[p - 1] or best_i[p - 1] < 0):
                    best_d[p] = best_d[p - 1]
                    best_i[p] = best_i[p - 1]
                    p -= 1
                best_d[p] = v
                best_i[p] = j
        out[start + r] = best_i


def minority_neighbors(Z: np.ndarray, k: int, chunk: int = 1024) -> np.ndarray:
    """Indices of the ``k`` nearest other rows of ``Z`` (Euclidean).

    Equal distances resolve to the lower row index.
    """
    n = Z.shape[0]
    if n <= k:
        raise ValueError(f"need more than {k} rows for {k} neighbours, got {n}")
    sq = np.einsum("ij,ij->i", Z, Z)
    ZT = np.ascontiguousarray(Z.T)   # a strided transpose makes the product several times slower
    out = np.empty((n, k), dtype=np.int64)
    # one distance buffer for all chunks; fresh large allocations page-fault on every chunk
    chunk = max(1, min(chunk, (1 << 22) // n))
    buf = np.empty((chunk, n))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        d = buf[:stop - start]
        np.matmul(Z[start:stop], ZT, out=d)
        d *= -2.0
        d += sq[start:stop, None]
        d += sq[None, :]
        np.maximum(d, 0.0, out=d)
        _top_k(d, start, k, out)
    return out


def smote(ds: Dataset, plan: ImbalancePlan = ImbalancePlan(Strategy.SMOTE)) -> Dataset:
    """Grow the minority class to the majority count by interpolation.

    Each synthetic row is ``x + u * (x_nn - x)`` for a random minority row
    ``x``, one of its ``k`` nearest minority neighbours ``x_nn`` (distances
    on z-scored features) and ``u ~ U[0, 1]``. Original rows come first and
    are unchanged; synthetic rows are appended with weight 1.
    """
    return smote_with_sources(ds, plan)[0]


def smote_with_sources(ds: Dataset, plan: ImbalancePlan = ImbalancePlan(Strategy.SMOTE)):
    """:func:`smote` plus, per synthetic row, the original row indices of its seed and neighbour."""
    X = ds.X
    if np.isnan(X).any():
        raise ValueError("smote needs imputed data; call impute_median first")
    y = ds.y
    n_pos = int(np.sum(y == 1))
    n_neg = len(y) - n_pos
    if n_pos == n_neg:
        return ds, np.empty(0, np.int64), np.empty(0, np.int64)
    minority = 1 if n_pos < n_neg else 0
    idx = np.flatnonzero(y == minority)
    n_min = idx.size
    k = plan.k_neighbors
    if n_min < k + 1:
        raise ValueError(f"smote needs at least {k + 1} minority rows, got {n_min}")
    n_new = abs(n_neg - n_pos)

    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    Z = (X[idx] - mu) / sd
    nn = minority_neighbors(Z, k)

    rng = np.random.default_rng(plan.seed)
    base = rng.integers(0, n_min, size=n_new)
    pick = rng.integers(0, k, size=n_new)
    u = rng.random(n_new)
    seeds = idx[base]
    neighbours = idx[nn[base, pick]]
    x0 = X[seeds]
    x1 = X[neighbours]
    synth = x0 + u[:, None] * (x1 - x0)

    out = Dataset(np.vstack([X, synth]), np.concatenate([y, np.full(n_new, minority)]),
                  np.concatenate([ds.w, np.ones(n_new)]), ds.feature_names)
    return out, seeds, neighbours


def apply_plan(ds: Dataset, plan: ImbalancePlan) -> tuple[Dataset, np.ndarray | None]:
    """Training data for a strategy plus the imputation vector it used (if any)."""
    if plan.strategy is Strategy.SMOTE:
        imputed, med = impute_median(ds)
        return smote(imputed, plan), med
    if plan.strategy is Strategy.WEIGHT:
        return weight_adjusted(ds), None
    return ds, None
