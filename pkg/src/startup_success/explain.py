"""Factor importance and per-prediction Shapley attributions for tree models.

Attributions live in margin space (log-odds for boosting, probability for
forests): ``base_value + sum(phi) == predict_raw(x)``. Features left out of
a coalition are integrated out by following both children weighted by
their training cover.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import date
from itertools import combinations

import numpy as np
from numba import njit

from .features import FEATURE_NAMES, feature_rows, format_value
from .trees import TreeEnsemble
from .trees.ensemble import sigmoid

MAX_BRUTEFORCE_FEATURES = 12


@dataclass(frozen=True)
class Attribution:
    base_value: float
    phi: np.ndarray
    model_output: float

    @property
    def residual(self) -> float:
        return float(self.base_value + np.sum(self.phi) - self.model_output)


def _ensemble_of(model) -> tuple[TreeEnsemble, object]:
    """(tree ensemble, preprocessing callable or None)."""
    if isinstance(model, TreeEnsemble):
        return model, None
    est = getattr(model, "estimator", None)
    if isinstance(est, TreeEnsemble):
        return est, model.prepare
    raise TypeError(f"attributions need a tree model, got {type(model).__name__}"
                    + (f" ({model.family})" if hasattr(model, "family") else ""))


def gain_importance(model) -> np.ndarray:
    """Total split gain per factor across all trees."""
    ens, _ = _ensemble_of(model)
    m = ens.n_features
    if m is None:
        m = 1 + max((int(t.feature.max()) for t in ens.trees), default=-1)
    out = np.zeros(m)
    for t in ens.trees:
        inner = t.feature >= 0
        np.add.at(out, t.feature[inner], t.gain[inner])
    return out


def _tree_expectation(t) -> float:
    leaves = t.feature < 0
    return float(np.sum(t.value[leaves] * t.cover[leaves]) / t.cover[0])


def expected_value(ens: TreeEnsemble) -> float:
    return ens.offset + ens.scale * sum(_tree_expectation(t) for t in ens.trees)


# --------------------------------------------------------------------------
# polynomial-time path algorithm


@njit(cache=True)
def _extend(feat, zf, of, pw, start, depth, z, o, f):
    p = start + depth
    feat[p] = f
    zf[p] = z
    of[p] = o
    pw[p] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pw[start + i + 1] += o * pw[start + i] * (i + 1) / (depth + 1)
        pw[start + i] = z * pw[start + i] * (depth - i) / (depth + 1)


@njit(cache=True)
def _unwind(feat, zf, of, pw, start, depth, idx):
    o = of[start + idx]
    z = zf[start + idx]
    nxt = pw[start + depth]
    for i in range(depth - 1, -1, -1):
        if o != 0.0:
            tmp = pw[start + i]
            pw[start + i] = nxt * (depth + 1) / ((i + 1) * o)
            nxt = tmp - pw[start + i] * z * (depth - i) / (depth + 1)
        else:
            pw[start + i] = pw[start + i] * (depth + 1) / (z * (depth - i))
    for i in range(idx, depth):
        feat[start + i] = feat[start + i + 1]
        zf[start + i] = zf[start + i + 1]
        of[start + i] = of[start + i + 1]


@njit(cache=True)
def _unwound_sum(zf, of, pw, start, depth, idx):
    o = of[start + idx]
    z = zf[start + idx]
    nxt = pw[start + depth]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if o != 0.0:
            tmp = nxt * (depth + 1) / ((i + 1) * o)
            total += tmp
            nxt = pw[start + i] - tmp * z * (depth - i) / (depth + 1)
        elif z != 0.0:
            total += pw[start + i] / z * (depth + 1) / (depth - i)
    return total


# recursive kernels are not cached: numba's on-disk cache mishandles recursion
@njit
def _recurse(x, feature, threshold, default_left, left, right, value, cover, phi,
             node, depth, feat, zf, of, pw, parent_start, z, o, f):
    start = parent_start + depth
    for i in range(depth):
        feat[start + i] = feat[parent_start + i]
        zf[start + i] = zf[parent_start + i]
        of[start + i] = of[parent_start + i]
        pw[start + i] = pw[parent_start + i]
    _extend(feat, zf, of, pw, start, depth, z, o, f)

    if feature[node] < 0:
        for i in range(1, depth + 1):
            w = _unwound_sum(zf, of, pw, start, depth, i)
            phi[feat[start + i]] += w * (of[start + i] - zf[start + i]) * value[node]
        return

    j = feature[node]
    xv = x[j]
    if np.isnan(xv):
        go_left = default_left[node]
    else:
        go_left = xv <= threshold[node]
    hot = left[node] if go_left else right[node]
    cold = right[node] if go_left else left[node]
    inz = 1.0
    ino = 1.0
    k = -1
    for i in range(1, depth + 1):
        if feat[start + i] == j:
            k = i
            break
    if k >= 0:
        inz = zf[start + k]
        ino = of[start + k]
        _unwind(feat, zf, of, pw, start, depth, k)
        depth -= 1
    c = cover[node]
    _recurse(x, feature, threshold, default_left, left, right, value, cover, phi,
             hot, depth + 1, feat, zf, of, pw, start, inz * cover[hot] / c, ino, j)
    _recurse(x, feature, threshold, default_left, left, right, value, cover, phi,
             cold, depth + 1, feat, zf, of, pw, start, inz * cover[cold] / c, 0.0, j)


@njit
def _shap_one_tree(x, feature, threshold, default_left, left, right, value, cover, phi, max_depth):
    size = (max_depth + 2) * (max_depth + 3) // 2 + max_depth + 2
    feat = np.full(size, -1, dtype=np.int64)
    zf = np.zeros(size)
    of = np.zeros(size)
    pw = np.zeros(size)
    _recurse(x, feature, threshold, default_left, left, right, value, cover, phi,
             0, 0, feat, zf, of, pw, 0, 1.0, 1.0, -1)


def _tree_depths(ens):
    cache = getattr(ens, "_shap_depths", None)
    if cache is None or len(cache) != len(ens.trees):
        cache = [t.depth() for t in ens.trees]
        ens._shap_depths = cache
    return cache


def tree_shap_raw(ens: TreeEnsemble, x) -> np.ndarray:
    """Unscaled per-feature sum of tree-level Shapley values."""
    x = np.ascontiguousarray(x, dtype=float)
    phi = np.zeros(x.shape[0])
    for t, d in zip(ens.trees, _tree_depths(ens)):
        if t.feature[0] < 0:
            continue
        _shap_one_tree(x, t.feature, t.threshold, t.default_left, t.left, t.right, t.value,
                       t.cover, phi, d)
    return phi


def tree_shap(model, x) -> Attribution:
    ens, prep = _ensemble_of(model)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("tree_shap expects one feature vector")
    if ens.n_features is not None and x.shape[0] != ens.n_features:
        raise ValueError(f"expected {ens.n_features} features, got {x.shape[0]}")
    if prep is not None:
        x = prep(x[None, :])[0]
    phi = ens.scale * tree_shap_raw(ens, x)
    return Attribution(expected_value(ens), phi, float(ens.predict_raw(x[None, :])[0]))


# --------------------------------------------------------------------------
# exhaustive oracle


def _conditional_expectation(t, x, known: frozenset, node=0) -> float:
    f = t.feature[node]
    if f < 0:
        return float(t.value[node])
    l, r = t.left[node], t.right[node]
    if f in known:
        xv = x[f]
        go_left = bool(t.default_left[node]) if math.isnan(xv) else xv <= t.threshold[node]
        return _conditional_expectation(t, x, known, l if go_left else r)
    c = t.cover[node]
    return (t.cover[l] / c * _conditional_expectation(t, x, known, l)
            + t.cover[r] / c * _conditional_expectation(t, x, known, r))


def shapley_bruteforce(model, x) -> Attribution:
    """Exact Shapley values by enumerating every coalition of each tree's features."""
    ens, prep = _ensemble_of(model)
    x = np.asarray(x, dtype=float)
    if ens.n_features is not None and x.shape[0] != ens.n_features:
        raise ValueError(f"expected {ens.n_features} features, got {x.shape[0]}")
    if prep is not None:
        x = prep(x[None, :])[0]
    phi = np.zeros(x.shape[0])
    for t in ens.trees:
        used = sorted(set(int(f) for f in t.feature if f >= 0))
        n = len(used)
        if n > MAX_BRUTEFORCE_FEATURES:
            raise ValueError(f"a tree uses {n} distinct features; exhaustive enumeration is "
                             f"limited to {MAX_BRUTEFORCE_FEATURES}")
        if n == 0:
            continue
        v = {}
        for size in range(n + 1):
            for S in combinations(used, size):
                key = frozenset(S)
                v[key] = _conditional_expectation(t, x, key)
        weights = [math.factorial(s) * math.factorial(n - s - 1) / math.factorial(n)
                   for s in range(n)]
        for i in used:
            others = [f for f in used if f != i]
            acc = 0.0
            for size in range(n):
                for S in combinations(others, size):
                    key = frozenset(S)
                    acc += weights[size] * (v[key | {i}] - v[key])
            phi[i] += ens.scale * acc
    return Attribution(expected_value(ens), phi, float(ens.predict_raw(x[None, :])[0]))


# --------------------------------------------------------------------------
# reports


@dataclass
class ExplanationReport:
    company_id: str
    as_of: date
    rows: list  # (factor, value, phi, direction), sorted by |phi| descending
    base_value: float
    model_output: float
    probability: float
    link: str

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["factor", "value", "phi", "direction"])
            for factor, value, phi, direction in self.rows:
                w.writerow([factor, format_value(value), repr(float(phi)), direction])

    def summary(self) -> dict:
        return {"company_id": self.company_id, "as_of": self.as_of.isoformat(),
                "base_value": self.base_value, "model_output": self.model_output,
                "probability": self.probability, "link": self.link,
                "n_factors": len(self.rows)}

    def write_summary(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def text(self) -> str:
        lines = [f"company {self.company_id} as of {self.as_of.isoformat()}",
                 f"base value {self.base_value:+.4f} -> output {self.model_output:+.4f} "
                 f"(probability {self.probability:.4f})"]
        width = max(len(r[0]) for r in self.rows) if self.rows else 0
        for factor, value, phi, direction in self.rows:
            shown = "missing" if value != value else format_value(value)
            lines.append(f"  {direction} {factor:<{width}}  {phi:+.4f}  (value {shown})")
        return "\n".join(lines)


def _direction(phi: float) -> str:
    if phi > 0:
        return "+"
    if phi < 0:
        return "-"
    return "0"


def explain_vector(model, x, company_id: str = "", as_of: date | None = None,
                   feature_names=FEATURE_NAMES) -> ExplanationReport:
    ens, _ = _ensemble_of(model)
    att = tree_shap(model, x)
    order = sorted(range(len(att.phi)), key=lambda j: (-abs(att.phi[j]), j))
    rows = [(feature_names[j], float(x[j]), float(att.phi[j]), _direction(att.phi[j]))
            for j in order]
    margin = att.base_value + float(np.sum(att.phi))
    if ens.kind == "gbdt":
        prob, link = float(sigmoid(np.array([margin]))[0]), "logistic"
    else:
        prob, link = float(min(max(margin, 0.0), 1.0)), "identity"
    return ExplanationReport(company_id, as_of, rows, att.base_value, att.model_output, prob, link)


def explain_report(store, company_id: str, t_s: date, model, basis: str = "company"):
    x = feature_rows(store, [company_id], t_s, basis)[0]
    return explain_vector(model, x, company_id, t_s)
