"""Threshold classification, confusion metrics, ROC curves and result tables."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np


def classify(probabilities, th: float = 0.5) -> np.ndarray:
    """1 where p >= th, else 0."""
    return (np.asarray(probabilities, dtype=float) >= th).astype(np.int8)


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    f1: float
    fpr: float
    threshold: float = 0.5
    # names of ratios whose denominator was zero (reported as 0)
    undefined: tuple[str, ...] = field(default=())

    @property
    def n(self):
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self):
        d = asdict(self)
        d["undefined"] = list(self.undefined)
        return d


def _ratio(num, den, name, flags):
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def from_counts(tp, fp, tn, fn, threshold=0.5) -> Metrics:
    flags: list[str] = []
    p = _ratio(tp, tp + fp, "precision", flags)
    r = _ratio(tp, tp + fn, "recall", flags)
    f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    if p + r == 0:
        flags.append("f1")
    fpr = _ratio(fp, fp + tn, "fpr", flags)
    return Metrics(int(tp), int(fp), int(tn), int(fn), p, r, f1, fpr, threshold, tuple(flags))


def metrics(predicted, actual, th: float = 0.5) -> Metrics:
    """Confusion metrics. ``predicted`` holds probabilities; they are thresholded at ``th``."""
    pred = np.asarray(predicted, dtype=float)
    y = np.asarray(actual).astype(bool)
    if pred.shape != y.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {y.shape}")
    if pred.size == 0:
        raise ValueError("metrics of an empty prediction set")
    yhat = classify(pred, th).astype(bool)
    tp = int(np.sum(yhat & y))
    fp = int(np.sum(yhat & ~y))
    fn = int(np.sum(~yhat & y))
    tn = int(y.size - tp - fp - fn)
    return from_counts(tp, fp, tn, fn, th)


def f1_from(precision, recall):
    return 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # first entry is +inf for the (0, 0) point
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc(scores, labels) -> RocCurve:
    """ROC over distinct score thresholds, descending; tied scores form one point."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape:
        raise ValueError(f"length mismatch: {s.shape} vs {y.shape}")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc needs both classes present")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(~y_sorted)
    # last index of each group of equal scores
    last = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    tpr = np.r_[0.0, tp[last] / n_pos]
    fpr = np.r_[0.0, fp[last] / n_neg]
    th = np.r_[np.inf, s_sorted[last]]
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(th, fpr, tpr, auc)


def auc(scores, labels) -> float:
    return roc(scores, labels).auc


def write_metrics_json(m: Metrics, path, extra: dict | None = None):
    d = m.to_dict()
    if extra:
        d.update(extra)
    with open(path, "w") as fh:
        json.dump(d, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_roc_csv(curve: RocCurve, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "fpr", "tpr"])
        for t, f, r in zip(curve.thresholds, curve.fpr, curve.tpr):
            w.writerow([repr(float(t)), repr(float(f)), repr(float(r))])


STRATEGY_PANELS = {"none": "(a) no adjustment", "smote": "(b) SMOTE",
                   "weight": "(c) weight adjustment"}


def write_results_table(rows, path):
    """One row per (model, strategy): panel, model, strategy, precision, recall, f1.

    ``rows`` is an iterable of ``(model_name, strategy, Metrics or None)``; None
    stands for an unsupported combination and is written as ``---``.
    """
    order = list(STRATEGY_PANELS)
    rows = sorted(rows, key=lambda r: (order.index(r[1]) if r[1] in order else len(order), r[0]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["panel", "model", "strategy", "precision", "recall", "f1"])
        for name, strategy, m in rows:
            panel = STRATEGY_PANELS.get(strategy, strategy)
            if m is None:
                w.writerow([panel, name, strategy, "---", "---", "---"])
            else:
                w.writerow([panel, name, strategy, f"{m.precision:.4f}", f"{m.recall:.4f}",
                            f"{m.f1:.4f}"])
