"""The 19 company factors, computed strictly from facts dated before t_s.

Missing values are NaN. Absent source data (no area, no tags, no disclosed
amounts, no recorded investors, first-time founders) yields NaN, never 0.
"""

from __future__ import annotations

import csv
import json
from bisect import bisect_left
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .ingest import Company, EntityStore, ExitKind, months_between, parse_date
from .windows import SampleEvent, TimeWindow, make_window

FEATURE_NAMES = (
    "found_year_offset",
    "macroeconomy",
    "company_age_months",
    "news_count",
    "monthly_avg_news",
    "province_prosperity",
    "city_prosperity",
    "mean_industry_prosperity_province",
    "max_industry_prosperity_province",
    "mean_industry_prosperity_city",
    "max_industry_prosperity_city",
    "num_funding_rounds",
    "total_raised_usd",
    "mean_investor_ipo_fraction",
    "max_investor_ipo_fraction",
    "mean_investor_acq_fraction",
    "max_investor_acq_fraction",
    "mean_founder_fail_fraction",
    "max_founder_fail_fraction",
)
N_FEATURES = len(FEATURE_NAMES)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}

FACTOR_DEFINITIONS = {
    "found_year_offset": "years from 1990 to the founding year",
    "macroeconomy": "companies founded in the same calendar year (and before t_s)",
    "company_age_months": "months from founding to t_s",
    "news_count": "news items dated before t_s",
    "monthly_avg_news": "news_count divided by company age in months (news_count when age is 0)",
    "province_prosperity": "active companies headquartered in the province at t_s",
    "city_prosperity": "active companies headquartered in the city at t_s",
    "mean_industry_prosperity_province": "mean over the company's industries of active same-industry companies in the province",
    "max_industry_prosperity_province": "max over the company's industries of active same-industry companies in the province",
    "mean_industry_prosperity_city": "mean over the company's industries of active same-industry companies in the city",
    "max_industry_prosperity_city": "max over the company's industries of active same-industry companies in the city",
    "num_funding_rounds": "funding rounds announced before t_s",
    "total_raised_usd": "sum of disclosed amounts of rounds before t_s",
    "mean_investor_ipo_fraction": "mean IPO fraction of the company's investors before t_s",
    "max_investor_ipo_fraction": "max IPO fraction of the company's investors before t_s",
    "mean_investor_acq_fraction": "mean acquisition fraction of the company's investors before t_s",
    "max_investor_acq_fraction": "max acquisition fraction of the company's investors before t_s",
    "mean_founder_fail_fraction": "mean share of founders' earlier companies closed before t_s",
    "max_founder_fail_fraction": "max share of founders' earlier companies closed before t_s",
}

MISSING = float("nan")
SAMPLE_COLUMNS = ("company_id", "window_index", "t_s", "t_f", "label")


# --------------------------------------------------------------------------
# single-factor definitions (direct computations)


def found_year_offset(company: Company) -> int:
    return company.founded.year - 1990


def macroeconomy(store: EntityStore, company: Company, t_s: date | None = None) -> int:
    """Companies founded in this company's founding year, itself included.

    With ``t_s`` only companies founded strictly before it are counted, so
    the factor cannot see the future when the founding year overlaps t_s.
    """
    peers = store.companies_by_founding_year.get(company.founded.year, ())
    if t_s is None:
        return len(peers)
    return sum(1 for cid in peers if store.companies[cid].founded < t_s)


def company_age_months(company: Company, t_s: date) -> int:
    return months_between(company.founded, t_s)


def news_factors(store: EntityStore, company: Company, t_s: date) -> tuple[int, float]:
    count = store.news_before(company.id, t_s)
    age = company_age_months(company, t_s)
    return count, (count / age if age > 0 else float(count))


def _active(c: Company, t_s: date) -> bool:
    return c.founded is not None and c.founded < t_s and (c.closed is None or c.closed >= t_s)


def prosperity(store: EntityStore, level: str, area: str | None, t_s: date) -> float:
    """Active companies headquartered in ``area`` at ``t_s``; NaN for no area."""
    if area is None:
        return MISSING
    return float(sum(1 for cid in store.companies_by_area.get((level, area), ())
                     if _active(store.companies[cid], t_s)))


def industry_prosperity(store: EntityStore, company: Company, t_s: date) -> tuple[float, float, float, float]:
    """(mean_prov, max_prov, mean_city, max_city) of per-industry local counts."""
    out = []
    for level in ("province", "city"):
        area = company.area_key(level)
        if area is None or not company.industries:
            out += [MISSING, MISSING]
            continue
        counts = []
        members = [store.companies[cid] for cid in store.companies_by_area.get((level, area), ())]
        for tag in sorted(company.industries):
            counts.append(sum(1 for c in members if tag in c.industries and _active(c, t_s)))
        out += [float(np.mean(counts)), float(max(counts))]
    return tuple(out)


def funding_factors(store: EntityStore, company: Company, t_s: date) -> tuple[int, float]:
    prior = store.rounds_before(company.id, t_s)
    amounts = [r.raised_usd for r in prior if r.raised_usd is not None]
    total = float(sum(amounts)) if amounts else MISSING
    return len(prior), total


def _exit_dates(store: EntityStore, company_id: str) -> tuple[date | None, date | None]:
    ipo = acq = None
    for e in store.exits_by_company.get(company_id, ()):
        if e.kind is ExitKind.IPO and ipo is None:
            ipo = e.date
        elif e.kind is ExitKind.ACQUISITION and acq is None:
            acq = e.date
    return ipo, acq


def investor_track_record(store: EntityStore, investor: str, t_s: date,
                          basis: str = "company") -> tuple[float, float]:
    """(ipo_fraction, acq_fraction) over the investor's deals before ``t_s``.

    ``basis="company"`` counts distinct portfolio companies; ``"deal"``
    counts every participation. NaN when there is no prior deal.
    """
    deals = [d for d in store.deals_by_investor.get(investor, ()) if d[0] < t_s]
    if basis == "company":
        units = sorted({cid for _, cid, _ in deals})
    elif basis == "deal":
        units = [cid for _, cid, _ in deals]
    else:
        raise ValueError(f"unknown basis {basis!r}")
    if not units:
        return MISSING, MISSING
    n_ipo = n_acq = 0
    for cid in units:
        ipo, acq = _exit_dates(store, cid)
        n_ipo += ipo is not None and ipo < t_s
        n_acq += acq is not None and acq < t_s
    return n_ipo / len(units), n_acq / len(units)


def _mean_max(values) -> tuple[float, float]:
    if not values:
        return MISSING, MISSING
    return float(np.mean(values)), float(max(values))


def investor_factors(store: EntityStore, company: Company, t_s: date,
                     basis: str = "company") -> tuple[float, float, float, float]:
    """(mean_ipo, max_ipo, mean_acq, max_acq) over the company's prior investors."""
    investors = sorted({i for r in store.rounds_before(company.id, t_s) for i in r.investor_ids})
    ipo, acq = [], []
    for inv in investors:
        fi, fa = investor_track_record(store, inv, t_s, basis)
        if not np.isnan(fi):
            ipo.append(fi)
            acq.append(fa)
    return _mean_max(ipo) + _mean_max(acq)


def founder_fail_fraction(store: EntityStore, person_id: str, company: Company, t_s: date) -> float:
    rec = store.founder_records[person_id]
    prior = [store.companies[cid] for cid, f in rec.foundings
             if cid != company.id and f is not None and f < company.founded]
    if not prior:
        return MISSING
    failed = sum(1 for c in prior if c.closed is not None and c.closed < t_s)
    return failed / len(prior)


def founder_factors(store: EntityStore, company: Company, t_s: date) -> tuple[float, float]:
    fracs = [founder_fail_fraction(store, pid, company, t_s)
             for pid in store.founders_by_company.get(company.id, ())]
    return _mean_max([f for f in fracs if not np.isnan(f)])


def feature_row(store: EntityStore, company_id: str, t_s: date, basis: str = "company") -> np.ndarray:
    """All 19 factors for one company, composed from the single-factor functions."""
    c = store.companies[company_id]
    news_count, monthly = news_factors(store, c, t_s)
    n_rounds, total = funding_factors(store, c, t_s)
    row = [
        found_year_offset(c),
        macroeconomy(store, c, t_s),
        company_age_months(c, t_s),
        news_count,
        monthly,
        prosperity(store, "province", c.area_key("province"), t_s),
        prosperity(store, "city", c.area_key("city"), t_s),
        *industry_prosperity(store, c, t_s),
        n_rounds,
        total,
        *investor_factors(store, c, t_s, basis),
        *founder_factors(store, c, t_s),
    ]
    return np.asarray(row, dtype=float)


# --------------------------------------------------------------------------
# batched computation


class _Snapshot:
    """Per-t_s aggregates shared by every company evaluated at that date."""

    def __init__(self, store: EntityStore, t_s: date, basis: str, exit_dates):
        self.store = store
        self.t_s = t_s
        self.basis = basis
        self.exit_dates = exit_dates
        area = Counter()
        area_tag = Counter()
        macro = Counter()
        for c in store.companies.values():
            if c.founded is None or c.founded >= t_s:
                continue
            macro[c.founded.year] += 1
            if c.closed is not None and c.closed < t_s:
                continue
            for level in ("province", "city"):
                key = c.area_key(level)
                if key is None:
                    continue
                area[(level, key)] += 1
                for tag in c.industries:
                    area_tag[(level, key, tag)] += 1
        self.area = area
        self.area_tag = area_tag
        self.macro = macro
        self._investor_cache = {}

    def investor(self, inv: str) -> tuple[float, float]:
        hit = self._investor_cache.get(inv)
        if hit is not None:
            return hit
        t_s = self.t_s
        deals = self.store.deals_by_investor.get(inv, ())
        k = bisect_left(deals, (t_s,))
        prior = deals[:k]
        if self.basis == "company":
            units = {cid for _, cid, _ in prior}
        else:
            units = [cid for _, cid, _ in prior]
        if not units:
            res = (MISSING, MISSING)
        else:
            n_ipo = n_acq = 0
            for cid in units:
                ipo, acq = self.exit_dates.get(cid, (None, None))
                n_ipo += ipo is not None and ipo < t_s
                n_acq += acq is not None and acq < t_s
            res = (n_ipo / len(units), n_acq / len(units))
        self._investor_cache[inv] = res
        return res

    def row(self, company_id: str) -> np.ndarray:
        store, t_s = self.store, self.t_s
        c = store.companies[company_id]
        age = months_between(c.founded, t_s)
        n_news = store.news_before(company_id, t_s)
        out = np.full(N_FEATURES, np.nan)
        out[0] = c.founded.year - 1990
        out[1] = self.macro[c.founded.year]
        out[2] = age
        out[3] = n_news
        out[4] = n_news / age if age > 0 else float(n_news)
        for j, level in ((5, "province"), (6, "city")):
            key = c.area_key(level)
            if key is not None:
                out[j] = self.area[(level, key)]
                if c.industries:
                    vals = [self.area_tag[(level, key, t)] for t in sorted(c.industries)]
                    base = 7 if level == "province" else 9
                    out[base] = np.mean(vals)
                    out[base + 1] = max(vals)
        prior = store.rounds_before(company_id, t_s)
        out[11] = len(prior)
        amounts = [r.raised_usd for r in prior if r.raised_usd is not None]
        if amounts:
            out[12] = sum(amounts)
        investors = sorted({i for r in prior for i in r.investor_ids})
        ipo, acq = [], []
        for inv in investors:
            fi, fa = self.investor(inv)
            if fi == fi:
                ipo.append(fi)
                acq.append(fa)
        out[13], out[14] = _mean_max(ipo)
        out[15], out[16] = _mean_max(acq)
        fails = []
        for pid in store.founders_by_company.get(company_id, ()):
            f = founder_fail_fraction(store, pid, c, t_s)
            if f == f:
                fails.append(f)
        out[17], out[18] = _mean_max(fails)
        return out


def _all_exit_dates(store: EntityStore) -> dict:
    return {cid: _exit_dates(store, cid) for cid in store.exits_by_company}


def feature_rows(store: EntityStore, company_ids, t_s: date, basis: str = "company") -> np.ndarray:
    """Feature matrix for many companies at one prediction date."""
    snap = _Snapshot(store, t_s, basis, _all_exit_dates(store))
    if not company_ids:
        return np.empty((0, N_FEATURES))
    return np.vstack([snap.row(cid) for cid in company_ids])


@dataclass
class Dataset:
    """Row-major labelled matrix. NaN marks a missing factor."""

    X: np.ndarray
    y: np.ndarray
    w: np.ndarray | None = None
    feature_names: tuple[str, ...] = FEATURE_NAMES
    company_ids: list[str] = field(default_factory=list)
    window_index: np.ndarray | None = None
    t_s: list = field(default_factory=list)
    t_f: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            self.X = self.X.reshape(len(self.X), -1)
        self.y = np.asarray(self.y, dtype=np.int64).ravel()
        if self.w is None:
            self.w = np.ones(len(self.y))
        self.w = np.asarray(self.w, dtype=float)
        if not (len(self.X) == len(self.y) == len(self.w)):
            raise ValueError("X, y and w lengths differ")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError("feature arity does not match feature_names")
        if np.any(self.w <= 0):
            raise ValueError("weights must be positive")

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return Dataset(self.X[idx], self.y[idx], self.w[idx], self.feature_names,
                       [self.company_ids[i] for i in idx] if self.company_ids else [],
                       None if self.window_index is None else self.window_index[idx],
                       [self.t_s[i] for i in idx] if self.t_s else [],
                       [self.t_f[i] for i in idx] if self.t_f else [])

    def with_weights(self, w) -> "Dataset":
        return Dataset(self.X, self.y, w, self.feature_names, self.company_ids,
                       self.window_index, self.t_s, self.t_f)

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.X)

    def to_csv(self, path) -> None:
        write_feature_csv(self, path)


def feature_matrix(store: EntityStore, samples: list[SampleEvent], basis: str = "company") -> Dataset:
    """One row per sample, in sample order."""
    exit_dates = _all_exit_dates(store)
    snaps: dict[date, _Snapshot] = {}
    rows = []
    for s in samples:
        snap = snaps.get(s.window.t_s)
        if snap is None:
            snap = snaps[s.window.t_s] = _Snapshot(store, s.window.t_s, basis, exit_dates)
        rows.append(snap.row(s.company_id))
    X = np.vstack(rows) if rows else np.empty((0, N_FEATURES))
    return Dataset(X, np.array([s.label for s in samples], dtype=np.int64), None,
                   FEATURE_NAMES, [s.company_id for s in samples],
                   np.array([s.window.index for s in samples], dtype=np.int64),
                   [s.window.t_s for s in samples], [s.window.t_f for s in samples])


# --------------------------------------------------------------------------
# CSV round trip


def format_value(v: float) -> str:
    if v != v:
        return ""
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def write_samples_csv(samples: list[SampleEvent], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_COLUMNS)
        for s in samples:
            w.writerow([s.company_id, s.window.index, s.window.t_s.isoformat(),
                        s.window.t_f.isoformat(), s.label])


def read_samples_csv(path) -> list[SampleEvent]:
    out = []
    windows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            idx = int(row["window_index"])
            t_s = parse_date(row["t_s"])
            w = windows.get((idx, t_s))
            if w is None:
                w = windows[(idx, t_s)] = make_window(idx, t_s)
                if row.get("t_f") and parse_date(row["t_f"]) != w.t_f:
                    w = windows[(idx, t_s)] = TimeWindow(idx, t_s, parse_date(row["t_f"]))
            out.append(SampleEvent(row["company_id"], w, int(row["label"])))
    return out


def write_feature_csv(ds: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_COLUMNS + tuple(ds.feature_names))
        for i in range(len(ds)):
            meta = [ds.company_ids[i] if ds.company_ids else str(i),
                    int(ds.window_index[i]) if ds.window_index is not None else "",
                    ds.t_s[i].isoformat() if ds.t_s else "",
                    ds.t_f[i].isoformat() if ds.t_f else "",
                    int(ds.y[i])]
            w.writerow(meta + [format_value(v) for v in ds.X[i]])


def read_feature_csv(path) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = tuple(header[len(SAMPLE_COLUMNS):])
        ids, widx, ts, tf, ys, rows = [], [], [], [], [], []
        for rec in reader:
            ids.append(rec[0])
            widx.append(int(rec[1]) if rec[1] else -1)
            ts.append(parse_date(rec[2]) if rec[2] else None)
            tf.append(parse_date(rec[3]) if rec[3] else None)
            ys.append(int(rec[4]))
            rows.append([float(v) if v != "" else np.nan for v in rec[len(SAMPLE_COLUMNS):]])
    X = np.asarray(rows, dtype=float).reshape(len(rows), len(names))
    return Dataset(X, np.asarray(ys), None, names, ids, np.asarray(widx, dtype=np.int64),
                   ts if all(t is not None for t in ts) else [],
                   tf if all(t is not None for t in tf) else [])


def write_factor_dictionary(path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({name: FACTOR_DEFINITIONS[name] for name in FEATURE_NAMES}, fh, indent=2)
        fh.write("\n")


def group_by_window(samples) -> dict[int, list[SampleEvent]]:
    out = defaultdict(list)
    for s in samples:
        out[s.window.index].append(s)
    return dict(out)
