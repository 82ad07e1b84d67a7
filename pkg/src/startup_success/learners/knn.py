from __future__ import annotations

import numpy as np


class KNNClassifier:
    """Fraction of positive labels among the k nearest training rows.

    Distances are Euclidean on already-scaled input; equal distances go to
    the lower training index. There is no weighted variant.
    """

    def __init__(self, X, y, k: int = 5, weights=None):
        if weights is not None and not np.all(np.asarray(weights) == 1):
            raise NotImplementedError("weight adjustment is not supported for k nearest neighbours")
        self.X = np.ascontiguousarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if not 1 <= k <= len(self.y):
            raise ValueError(f"k must lie in [1, {len(self.y)}], got {k}")
        self.k = int(k)
        self._sq = np.einsum("ij,ij->i", self.X, self.X)

    def neighbors(self, Q, chunk: int = 512) -> np.ndarray:
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        k = self.k
        out = np.empty((Q.shape[0], k), dtype=np.int64)
        for start in range(0, Q.shape[0], chunk):
            q = Q[start:start + chunk]
            d = np.einsum("ij,ij->i", q, q)[:, None] + self._sq[None, :] - 2.0 * q @ self.X.T
            np.maximum(d, 0.0, out=d)
            if k < d.shape[1]:
                kth = np.partition(d, k - 1, axis=1)[:, k - 1]
            else:
                kth = d.max(axis=1)
            for r in range(q.shape[0]):
                cand = np.flatnonzero(d[r] <= kth[r])
                order = np.argsort(d[r, cand], kind="stable")
                out[start + r] = cand[order[:k]]
        return out

    def predict_proba(self, Q) -> np.ndarray:
        return self.y[self.neighbors(Q)].mean(axis=1)

    def to_dict(self):
        return {"k": self.k, "X": self.X.tolist(), "y": self.y.astype(int).tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["X"], dtype=float).reshape(len(d["y"]), -1), d["y"], d["k"])


def train_knn(X, y, k: int = 5, weights=None) -> KNNClassifier:
    return KNNClassifier(X, y, k, weights)
