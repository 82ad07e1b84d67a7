"""Additive tree models: prediction and versioned JSON serialization."""

from __future__ import annotations

import json

import numpy as np

from . import _kernels as K
from .grower import TreeArrays

MODEL_FORMAT = "startup-success/tree-ensemble"
MODEL_VERSION = 1


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class TreeEnsemble:
    """A list of trees combined as ``offset + scale * sum(tree outputs)``.

    ``kind="gbdt"``: offset is the base log-odds, scale the learning rate,
    and probabilities go through the logistic link. ``kind="forest"``
    (CART is a one-tree forest): offset 0, scale ``1/n_trees``, the raw
    output is already a probability.
    """

    def __init__(self, kind: str, trees: list[TreeArrays], *, base_score: float = 0.0,
                 learning_rate: float = 1.0, feature_names=None, params=None,
                 growth: str | None = None):
        if kind not in ("gbdt", "forest", "cart"):
            raise ValueError(f"unknown ensemble kind {kind!r}")
        self.kind = kind
        self.trees = list(trees)
        self.base_score = float(base_score)
        self.learning_rate = float(learning_rate)
        self.feature_names = tuple(feature_names) if feature_names is not None else None
        self.params = dict(params or {})
        self.growth = growth
        self.history: list[float] = []
        self._flat = None

    @property
    def n_features(self) -> int | None:
        return None if self.feature_names is None else len(self.feature_names)

    @property
    def offset(self) -> float:
        return self.base_score if self.kind == "gbdt" else 0.0

    @property
    def scale(self) -> float:
        if self.kind == "gbdt":
            return self.learning_rate
        return 1.0 / len(self.trees) if self.trees else 0.0

    def _flatten(self):
        if self._flat is None:
            offsets = np.zeros(len(self.trees) + 1, dtype=np.int64)
            offsets[1:] = np.cumsum([t.n_nodes for t in self.trees])

            def cat(attr, dtype):
                if not self.trees:
                    return np.zeros(0, dtype=dtype)
                return np.ascontiguousarray(np.concatenate([getattr(t, attr) for t in self.trees]),
                                            dtype=dtype)

            self._flat = (cat("feature", np.int64), cat("threshold", np.float64),
                          cat("default_left", np.bool_), cat("left", np.int64),
                          cat("right", np.int64), cat("value", np.float64), offsets)
        return self._flat

    def _check(self, X):
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
        if self.n_features is not None and X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def tree_sum(self, X) -> np.ndarray:
        X = self._check(X)
        out = np.zeros(X.shape[0])
        if self.trees:
            K.predict_sum(X, *self._flatten(), out)
        return out

    def tree_outputs(self, X) -> np.ndarray:
        """(n_rows, n_trees) leaf values, unscaled."""
        X = self._check(X)
        out = np.zeros((X.shape[0], len(self.trees)))
        if self.trees:
            K.predict_trees(X, *self._flatten(), out)
        return out

    def predict_raw(self, X) -> np.ndarray:
        """Margin: log-odds for boosting, probability for forests."""
        return self.offset + self.scale * self.tree_sum(X)

    def predict_proba(self, X) -> np.ndarray:
        raw = self.predict_raw(X)
        if self.kind == "gbdt":
            return sigmoid(raw)
        return np.clip(raw, 0.0, 1.0)

    def predict(self, x) -> float:
        """Probability for a single feature vector (NaN = missing)."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ValueError("predict expects one feature vector")
        return float(self.predict_proba(x[None, :])[0])

    def append(self, tree: TreeArrays):
        self.trees.append(tree)
        self._flat = None

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind,
            "growth": self.growth,
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "feature_names": list(self.feature_names) if self.feature_names else None,
            "params": self.params,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeEnsemble":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not a tree-ensemble model document")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        return cls(d["kind"], [TreeArrays.from_dict(t) for t in d["trees"]],
                   base_score=d["base_score"], learning_rate=d["learning_rate"],
                   feature_names=d["feature_names"], params=d["params"], growth=d["growth"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "TreeEnsemble":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "TreeEnsemble":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())
