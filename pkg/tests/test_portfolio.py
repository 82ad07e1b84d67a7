import csv
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import perturb_after
from startup_success.features import feature_matrix
from startup_success.ingest import Company, EntityStore, FundingRound, RoundType
from startup_success.models import train_model
from startup_success.portfolio import (LeakageError, backtest, construct, parse_stage_map,
                                       stage_of, success_curve, train_and_backtest,
                                       write_portfolio_csv)
from startup_success.windows import samples_in, window_schedule

scores = st.dictionaries(st.text("abcdef", min_size=1, max_size=3),
                         st.sampled_from([0.1, 0.2, 0.5, 0.7, 0.9]), min_size=1, max_size=30)


@settings(max_examples=80, deadline=None)
@given(scores, st.data())
def test_construct_equals_sort_prefix(scored, data):
    k = data.draw(st.integers(0, len(scored)))
    port = construct(scored, k)
    oracle = sorted(scored.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    assert list(port.entries) == oracle
    probs = [p for _, p in port.entries]
    assert probs == sorted(probs, reverse=True)
    assert len(set(port.company_ids)) == k


@settings(max_examples=80, deadline=None)
@given(scores, st.data())
def test_success_curve_monotone(scored, data):
    realized = {c: data.draw(st.integers(0, 1)) for c in scored}
    curve = success_curve(scored, realized)
    assert np.all(np.diff(curve.successes) >= 0)
    assert np.all(curve.successes <= curve.ks)
    assert curve.successes[-1] == sum(realized.values())


def test_construct_rejects_oversized_k():
    with pytest.raises(ValueError):
        construct({"a": 0.1}, 2)


def test_stage_mapping():
    c = Company("a", "A", date(2000, 1, 1))
    rounds = [FundingRound("1", "a", RoundType.SEED, date(2001, 1, 1)),
              FundingRound("2", "a", RoundType.A, date(2003, 1, 1)),
              FundingRound("3", "a", RoundType.DEBT, date(2005, 1, 1))]
    s = EntityStore.build([c], rounds)
    assert stage_of(s, "a", date(2002, 1, 1)) == "BeforeSeriesA"
    assert stage_of(s, "a", date(2004, 1, 1)) == "SeriesA"
    assert stage_of(s, "a", date(2006, 1, 1)) is None
    custom = parse_stage_map({"Debt": "SeriesB"})
    assert stage_of(s, "a", date(2006, 1, 1), custom) == "SeriesB"
    with pytest.raises(ValueError):
        parse_stage_map({"Debt": "Later"})


@pytest.fixture(scope="module")
def oos_model(small_store, small_samples):
    train = samples_in(small_samples, range(10))
    ds = feature_matrix(small_store, train)
    return train_model("gbdt-lgbm", "weight", ds, {"n_estimators": 40})


def test_backtest_and_csv(small_store, oos_model, tmp_path):
    w = window_schedule()[11]
    res = backtest(small_store, oos_model, w, 20)
    assert res.portfolio.k == 20
    for st_, (port, curve) in res.stages.items():
        assert port.k <= 20
        assert all(stage_of(small_store, c, w.t_s) == st_ for c in port.company_ids)
    write_portfolio_csv(small_store, res.portfolio, w, res.realized, tmp_path / "p.csv")
    rows = list(csv.DictReader(open(tmp_path / "p.csv")))
    assert [int(r["rank"]) for r in rows] == list(range(1, 21))
    assert all(r["last_deal"] for r in rows)
    for r in rows:
        # a non-empty first deal in the window is exactly a success
        assert (r["first_deal_in_window"] != "") == (r["label"] == "1")


def test_leakage_refused(small_store, small_samples, oos_model):
    with pytest.raises(LeakageError):
        backtest(small_store, oos_model, window_schedule()[9], 10)
    with pytest.raises(LeakageError):
        train_and_backtest(small_store, "logreg", "none", samples_in(small_samples, range(11)),
                           window_schedule()[10], 5)


def test_scores_ignore_post_cutoff_events(small_store, oos_model):
    w = window_schedule()[11]
    base = backtest(small_store, oos_model, w, 10, stages=())
    rng = np.random.default_rng(8)
    for _ in range(5):
        s2 = perturb_after(small_store, w.t_s, rng, n_events=5)
        res = backtest(s2, oos_model, w, 10, stages=())
        assert res.scored == base.scored
