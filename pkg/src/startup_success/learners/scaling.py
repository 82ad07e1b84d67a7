from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..resample import apply_imputation


@dataclass
class Scaler:
    """Train-median imputation followed by z-scoring with train statistics."""

    medians: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X) -> "Scaler":
        X = np.asarray(X, dtype=float)
        med = np.zeros(X.shape[1])
        for j in range(X.shape[1]):
            col = X[:, j]
            col = col[~np.isnan(col)]
            if col.size:
                med[j] = np.median(col)
        dense = apply_imputation(X, med)
        mean = dense.mean(axis=0)
        std = dense.std(axis=0)
        std[std == 0] = 1.0
        return cls(med, mean, std)

    def transform(self, X) -> np.ndarray:
        return (apply_imputation(X, self.medians) - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"medians": self.medians.tolist(), "mean": self.mean.tolist(),
                "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Scaler":
        return cls(np.asarray(d["medians"], dtype=float), np.asarray(d["mean"], dtype=float),
                   np.asarray(d["std"], dtype=float))
