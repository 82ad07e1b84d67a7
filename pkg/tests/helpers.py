"""Fixture builders shared across test modules."""

from dataclasses import replace
from datetime import date, timedelta

import numpy as np

from oracles import exhaustive_split
from startup_success.features import Dataset
from startup_success.ingest import (Company, ExitEvent, ExitKind, FounderRecord, FundingRound,
                                    NewsItem, RoundType)
from startup_success.trees import (BoostParams, ForestParams, best_split, build_histograms,
                                   train_forest, train_gbdt)

KINDS = ("round", "news", "exit", "close", "company", "founder", "investor", "drop")


def _later(rng, t_s, span_days=4000):
    return t_s + timedelta(days=int(rng.integers(0, span_days)))


def perturb_after(store, t_s: date, rng, n_events: int = 3):
    """A copy of ``store`` with ``n_events`` random edits all dated on or after ``t_s``."""
    companies = dict(store.companies)
    rounds = list(store.rounds)
    exits = list(store.exits)
    founders = list(store.founders)
    news = list(store.news)
    ids = sorted(companies)
    investors = list(store.investors) or ["inv-new"]
    tag = int(rng.integers(1 << 30))
    for k in range(n_events):
        kind = KINDS[int(rng.integers(len(KINDS)))]
        cid = ids[int(rng.integers(len(ids)))]
        c = companies[cid]
        when = max(_later(rng, t_s), c.founded)
        if kind == "round":
            inv = frozenset(investors[int(rng.integers(len(investors)))] for _ in range(2))
            rounds.append(FundingRound(f"p{tag}-{k}", cid, RoundType.B, when,
                                       float(rng.integers(1, 10**7)), inv))
        elif kind == "news":
            news.append(NewsItem(cid, when))
        elif kind == "exit":
            has_ipo = any(e.company_id == cid and e.kind is ExitKind.IPO for e in exits)
            exit_kind = ExitKind.ACQUISITION if has_ipo or rng.random() < 0.5 else ExitKind.IPO
            exits.append(ExitEvent(cid, exit_kind, when))
        elif kind == "close":
            if c.closed is None or c.closed >= t_s:
                companies[cid] = replace(c, closed=when)
        elif kind == "company":
            nid = f"new{tag}-{k}"
            companies[nid] = Company(nid, "New", when, c.country, c.province, c.city,
                                     c.industries)
            rounds.append(FundingRound(f"pn{tag}-{k}", nid, RoundType.SEED, _later(rng, when),
                                       None, frozenset(investors[:1])))
            founders.append(FounderRecord(f"pf{tag}-{k}", ((nid, when),)))
        elif kind == "founder":
            # an existing founder starts a new company after t_s
            if founders:
                i = int(rng.integers(len(founders)))
                f = founders[i]
                nid = f"fn{tag}-{k}"
                companies[nid] = Company(nid, "Spin", when, c.country, c.province, c.city)
                founders[i] = FounderRecord(f.person_id, f.foundings + ((nid, when),))
        elif kind == "investor":
            # a post-t_s deal by an existing investor in a different company
            rounds.append(FundingRound(f"pi{tag}-{k}", cid, RoundType.C, when, None,
                                       frozenset([investors[int(rng.integers(len(investors)))]])))
        elif kind == "drop":
            late = [i for i, r in enumerate(rounds) if r.announced >= t_s]
            if late:
                rounds.pop(late[int(rng.integers(len(late)))])
            late_news = [i for i, n in enumerate(news) if n.date >= t_s]
            if late_news:
                news.pop(late_news[int(rng.integers(len(late_news)))])
    return store.replace(companies=companies.values(), rounds=rounds, exits=exits,
                         founders=founders, news=news)


def split_fixture(rng, n=None, m=None):
    n = n or int(rng.integers(2, 200))
    m = m or int(rng.integers(1, 6))
    X = rng.integers(0, int(rng.integers(2, 12)), size=(n, m)).astype(float)
    X[rng.random(X.shape) < rng.uniform(0, 0.5)] = np.nan
    g = rng.normal(size=n)
    h = rng.uniform(0.05, 1.0, size=n)
    return X, g, h


def compare_split(X, g, h, lam=1.0, gamma=0.0, mcw=1.0):
    hist = build_histograms(X, n_bins=255)
    params = BoostParams(lambda_l2=lam, gamma_min_gain=gamma, min_child_weight=mcw)
    got = best_split(np.arange(len(g)), g, h, hist, params)
    want = exhaustive_split(X, g, h, lam, gamma, mcw)
    if want is None or got is None:
        return want is None and got is None
    same = (got.feature, got.threshold, got.default_left) == want[1:]
    # sums accumulated in a different order may reorder near-exact ties
    tie = abs(got.gain - want[0]) <= 1e-9 * max(1.0, abs(want[0]))
    return (same and abs(got.gain - want[0]) <= 1e-9 * max(1.0, abs(want[0]))) or (not same and tie)


def random_ensemble(rng, kind="gbdt", m=6, n=300, depth=3, n_trees=4):
    X = rng.normal(size=(n, m)).round(1)
    X[rng.random(X.shape) < 0.2] = np.nan
    y = (rng.random(n) < 0.4).astype(int)
    ds = Dataset(X, y, feature_names=tuple(f"f{j}" for j in range(m)))
    if kind == "gbdt":
        return train_gbdt(ds, BoostParams(n_estimators=n_trees, max_depth=depth, lambda_l2=0.1,
                                          min_child_weight=0.0, learning_rate=0.3)), X
    return train_forest(ds, ForestParams(n_estimators=n_trees, max_depth=depth, seed=1)), X


ACCEPTANCE_LINES: list[str] = []


def verdict(n: int, ok: bool, detail: str, elapsed: float, budget: float) -> bool:
    """Record and print one acceptance line; the runtime budget is part of the verdict."""
    ok = bool(ok) and elapsed < budget
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.1f}s of {budget:.0f}s]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
