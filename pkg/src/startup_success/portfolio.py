"""Top-k portfolios, success curves and stage-filtered backtests."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .features import feature_rows
from .ingest import EntityStore, RoundType
from .windows import TimeWindow, eligible_companies, label

STAGES = ("BeforeSeriesA", "SeriesA", "SeriesB")

# Latest-round type -> stage. Types absent from the mapping (C and later,
# debt, corporate, ...) fall in no stage.
DEFAULT_STAGE_MAP = {
    RoundType.PRE_SEED: "BeforeSeriesA",
    RoundType.SEED: "BeforeSeriesA",
    RoundType.CONVERTIBLE: "BeforeSeriesA",
    RoundType.NON_EQUITY: "BeforeSeriesA",
    RoundType.A: "SeriesA",
    RoundType.B: "SeriesB",
}


class LeakageError(ValueError):
    pass


@dataclass(frozen=True)
class Portfolio:
    entries: tuple[tuple[str, float], ...]
    as_of: date | None = None

    @property
    def k(self):
        return len(self.entries)

    @property
    def company_ids(self):
        return [cid for cid, _ in self.entries]


@dataclass(frozen=True)
class SuccessCurve:
    ks: np.ndarray
    successes: np.ndarray

    @property
    def points(self):
        return list(zip(self.ks.tolist(), self.successes.tolist()))

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "successes"])
            w.writerows(self.points)


def ranking(scored: dict) -> list[tuple[str, float]]:
    """All (company, probability) pairs, probability descending then id ascending."""
    return sorted(((cid, float(p)) for cid, p in scored.items()), key=lambda e: (-e[1], e[0]))


def construct(scored: dict, k: int, as_of: date | None = None) -> Portfolio:
    if k < 0:
        raise ValueError("k must be non-negative")
    if k > len(scored):
        raise ValueError(f"k={k} exceeds the candidate pool of {len(scored)}")
    return Portfolio(tuple(ranking(scored)[:k]), as_of)


def success_curve(scored: dict, realized: dict, ks=None) -> SuccessCurve:
    order = ranking(scored)
    hits = np.cumsum([int(realized[cid]) for cid, _ in order])
    if ks is None:
        ks = np.arange(1, len(order) + 1)
    ks = np.asarray(ks, dtype=np.int64)
    if np.any(ks < 0) or np.any(ks > len(order)):
        raise ValueError("every k must lie in [0, pool size]")
    padded = np.r_[0, hits]
    return SuccessCurve(ks, padded[ks])


def stage_of(store: EntityStore, company_id: str, as_of: date, mapping=None) -> str | None:
    mapping = DEFAULT_STAGE_MAP if mapping is None else mapping
    rounds = store.rounds_before(company_id, as_of)
    if not rounds:
        return None
    return mapping.get(rounds[-1].round_type)


def stage_filter(store: EntityStore, stage: str, as_of: date, mapping=None,
                 candidates=None) -> set[str]:
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; choose from {', '.join(STAGES)}")
    if candidates is None:
        candidates = eligible_companies(store, as_of)
    return {cid for cid in candidates if stage_of(store, cid, as_of, mapping) == stage}


def parse_stage_map(pairs: dict) -> dict:
    """Build a stage mapping from ``{round type value: stage}`` strings."""
    out = {}
    for rt, st in pairs.items():
        if st not in STAGES:
            raise ValueError(f"unknown stage {st!r}")
        out[RoundType(rt)] = st
    return out


def _deal_text(rt: RoundType, when: date) -> str:
    return f"{rt.value} {when.isoformat()}"


def last_deal(store: EntityStore, company_id: str, as_of: date) -> str:
    rounds = store.rounds_before(company_id, as_of)
    return _deal_text(rounds[-1].round_type, rounds[-1].announced) if rounds else ""


def first_deal_in_window(store: EntityStore, company_id: str, window: TimeWindow) -> str:
    events = [(r.announced, r.round_type.value) for r in store.rounds_by_company.get(company_id, ())
              if window.contains(r.announced)]
    events += [(e.date, e.kind.value) for e in store.exits_by_company.get(company_id, ())
               if window.contains(e.date)]
    if not events:
        return ""
    when, what = min(events)
    return f"{what} {when.isoformat()}"


def check_no_leakage(model, window: TimeWindow):
    through = getattr(model, "trained_through", None)
    if through is not None and through >= window.t_s:
        raise LeakageError(f"model was trained on labels through {through.isoformat()}, "
                           f"not before the out-of-sample start {window.t_s.isoformat()}")


def score_companies(store: EntityStore, model, as_of: date, candidates=None,
                    basis: str = "company") -> dict:
    if candidates is None:
        candidates = eligible_companies(store, as_of)
    candidates = list(candidates)
    if not candidates:
        return {}
    X = feature_rows(store, candidates, as_of, basis)
    p = model.predict_proba(X)
    return dict(zip(candidates, p.tolist()))


@dataclass
class BacktestResult:
    window: TimeWindow
    scored: dict
    realized: dict
    portfolio: Portfolio
    curve: SuccessCurve
    stages: dict = field(default_factory=dict)  # stage -> (Portfolio, SuccessCurve)

    @property
    def base_rate(self):
        return float(np.mean(list(self.realized.values()))) if self.realized else 0.0


def backtest(store: EntityStore, model, window: TimeWindow, k: int, ks=None,
             stages=STAGES, stage_map=None, basis: str = "company") -> BacktestResult:
    """Score every company eligible at ``window.t_s`` and realise labels in the window."""
    check_no_leakage(model, window)
    candidates = eligible_companies(store, window.t_s)
    scored = score_companies(store, model, window.t_s, candidates, basis)
    realized = {cid: label(store, cid, window) for cid in candidates}
    port = construct(scored, min(k, len(scored)), window.t_s)
    curve = success_curve(scored, realized, ks)
    per_stage = {}
    for st in stages:
        members = stage_filter(store, st, window.t_s, stage_map, candidates)
        sub = {cid: scored[cid] for cid in members}
        sub_real = {cid: realized[cid] for cid in members}
        per_stage[st] = (construct(sub, min(k, len(sub)), window.t_s),
                         success_curve(sub, sub_real, None))
    return BacktestResult(window, scored, realized, port, curve, per_stage)


def train_and_backtest(store: EntityStore, family: str, strategy: str, train_samples,
                       window: TimeWindow, k: int, seed: int = 0, params=None,
                       basis: str = "company", n_threads: int = 1, **kw) -> BacktestResult:
    """Refuse leaky training sets before fitting, then backtest."""
    from .features import feature_matrix
    from .models import train_model

    if not train_samples:
        raise ValueError("empty training sample list")
    latest = max(s.window.t_f for s in train_samples)
    if latest >= window.t_s:
        raise LeakageError(f"training labels run through {latest.isoformat()}, not before "
                           f"the out-of-sample start {window.t_s.isoformat()}")
    ds = feature_matrix(store, train_samples, basis)
    model = train_model(family, strategy, ds, params, seed=seed, n_threads=n_threads)
    return backtest(store, model, window, k, basis=basis, **kw)


def write_portfolio_csv(store: EntityStore, portfolio: Portfolio, window: TimeWindow,
                        realized: dict, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "company_id", "name", "probability", "last_deal",
                    "first_deal_in_window", "label"])
        for rank, (cid, p) in enumerate(portfolio.entries, 1):
            w.writerow([rank, cid, store.companies[cid].name, repr(float(p)),
                        last_deal(store, cid, window.t_s),
                        first_deal_in_window(store, cid, window), int(realized[cid])])
