"""Quantile binning with a separate missing bucket per feature."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import THRESHOLD_ALL

DEFAULT_BINS = 255


def feature_edges(values: np.ndarray, n_bins: int) -> np.ndarray:
    """Split points for one column; bin ``b`` holds ``edges[b-1] < x <= edges[b]``.

    When the column has at most ``n_bins`` distinct present values every
    value gets its own bin (exact binning). Otherwise edges sit on data
    quantiles. A constant column gets no edges.
    """
    present = values[~np.isnan(values)]
    if present.size == 0:
        return np.empty(0)
    distinct = np.unique(present)
    if distinct.size <= n_bins:
        return distinct[:-1].copy()
    qs = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
    edges = np.unique(np.quantile(present, qs, method="inverted_cdf"))
    return edges[edges < distinct[-1]]


@dataclass
class BinMapper:
    edges: list
    n_bins: int

    @classmethod
    def fit(cls, X: np.ndarray, n_bins: int = DEFAULT_BINS) -> "BinMapper":
        if n_bins < 2:
            raise ValueError("n_bins must be at least 2")
        if n_bins > 65534:
            raise ValueError("n_bins too large")
        X = np.asarray(X, dtype=float)
        return cls([feature_edges(X[:, j], n_bins) for j in range(X.shape[1])], n_bins)

    @property
    def missing_bin(self) -> int:
        return self.n_bins

    @property
    def n_present_bins(self) -> np.ndarray:
        return np.array([len(e) + 1 for e in self.edges], dtype=np.int64)

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Feature-major (n_features, n_rows) uint16 bin codes."""
        X = np.asarray(X, dtype=float)
        out = np.empty((X.shape[1], X.shape[0]), dtype=np.uint16)
        for j, e in enumerate(self.edges):
            col = X[:, j]
            codes = np.searchsorted(e, col, side="left")
            codes[np.isnan(col)] = self.missing_bin
            out[j] = codes
        return out

    def threshold(self, feature: int, bin_idx: int) -> float:
        e = self.edges[feature]
        return float(e[bin_idx]) if bin_idx < len(e) else THRESHOLD_ALL


@dataclass
class Histograms:
    mapper: BinMapper
    binned: np.ndarray

    @property
    def missing_fraction(self) -> np.ndarray:
        return (self.binned == self.mapper.missing_bin).mean(axis=1)

    def n_candidates(self) -> np.ndarray:
        return self.mapper.n_present_bins - 1


def build_histograms(X, n_bins: int = DEFAULT_BINS) -> Histograms:
    """Bin edges plus binned columns for a raw (NaN-for-missing) matrix."""
    X = getattr(X, "X", X)
    mapper = BinMapper.fit(X, n_bins)
    return Histograms(mapper, mapper.transform(X))
