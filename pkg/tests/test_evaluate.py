import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from startup_success.evaluate import (auc, from_counts, metrics, roc, write_results_table,
                                      write_roc_csv)


def pairwise_auc(s, y):
    pos, neg = s[y == 1], s[y == 0]
    diff = pos[:, None] - neg[None, :]
    return (np.sum(diff > 0) + 0.5 * np.sum(diff == 0)) / diff.size


def test_metrics_known_counts():
    p = np.array([0.9, 0.8, 0.4, 0.6, 0.1, 0.5])
    y = np.array([1, 0, 1, 1, 0, 0])
    m = metrics(p, y, 0.5)
    assert (m.tp, m.fp, m.tn, m.fn) == (2, 2, 1, 1)
    assert m.precision == 0.5 and m.recall == pytest.approx(2 / 3)
    assert m.f1 == pytest.approx(4 / 7) and m.fpr == pytest.approx(2 / 3)
    assert m.n == 6 and m.undefined == ()


def test_zero_denominators_flagged():
    m = from_counts(0, 0, 5, 3)
    assert m.precision == 0.0 and m.f1 == 0.0
    assert set(m.undefined) == {"precision", "f1"}
    with pytest.raises(ValueError):
        metrics([], [])
    with pytest.raises(ValueError):
        metrics([0.1, 0.2], [1])


def test_threshold_extremes(rng):
    s = rng.random(100)
    y = rng.integers(0, 2, 100)
    assert metrics(s, y, 0.0).recall == 1.0
    assert metrics(s, y, np.nextafter(s.max(), 2)).recall == 0.0


def test_roc_with_ties_and_export(tmp_path):
    s = np.array([0.9, 0.9, 0.5, 0.5, 0.1])
    y = np.array([1, 0, 1, 0, 0])
    c = roc(s, y)
    assert c.points == [(0.0, 0.0), (1 / 3, 0.5), (2 / 3, 1.0), (1.0, 1.0)]
    assert c.auc == pytest.approx(pairwise_auc(s, y))
    write_roc_csv(c, tmp_path / "r.csv")
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == ["threshold", "fpr", "tpr"] and rows[1][0] == "inf"
    with pytest.raises(ValueError):
        roc([0.1, 0.2], [1, 1])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 300))
def test_roc_properties(seed, n):
    rng = np.random.default_rng(seed)
    s = np.round(rng.random(n), int(rng.integers(1, 4)))
    y = rng.integers(0, 2, n)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    c = roc(s, y)
    assert c.points[0] == (0.0, 0.0) and c.points[-1] == (1.0, 1.0)
    assert np.all(np.diff(c.fpr) >= 0) and np.all(np.diff(c.tpr) >= 0)
    assert c.auc == pytest.approx(pairwise_auc(s, y), abs=1e-12)
    # strictly monotone transforms leave AUC unchanged
    assert auc(np.exp(3 * s) - 7, y) == pytest.approx(c.auc, abs=1e-12)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_metric_invariants(tp, fp, tn, fn):
    m = from_counts(tp, fp, tn, fn)
    assert m.n == tp + fp + tn + fn
    assert 0 <= m.f1 <= 2 * min(m.precision, m.recall) + 1e-12
    assert from_counts(tp, fn, tn, fp).f1 == pytest.approx(m.f1) or tp == 0


def test_results_table(tmp_path):
    m = from_counts(5, 5, 10, 5)
    write_results_table([("LightGBM", "weight", m), ("KNN", "weight", None),
                         ("LightGBM", "none", m)], tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["panel", "model", "strategy", "precision", "recall", "f1"]
    assert rows[1][:3] == ["(a) no adjustment", "LightGBM", "none"]
    assert rows[2] == ["(c) weight adjustment", "KNN", "weight", "---", "---", "---"]
    assert rows[3][3:] == ["0.5000", "0.5000", "0.5000"]
