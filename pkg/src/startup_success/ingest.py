"""Crunchbase-style CSV export loading and the immutable entity store.

The store keeps companies, funding rounds, exit events, founder histories and
news dates, plus the lookup indexes every downstream stage relies on
(rounds by company, deals by investor, companies by area and founding year).
"""

from __future__ import annotations

import csv
import enum
import logging
import os
from bisect import bisect_left
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

logger = logging.getLogger(__name__)

MIN_FOUNDED = date(1990, 1, 1)

REQUIRED_FILES = {
    "organizations.csv": ("uuid", "name", "founded_on", "closed_on", "status",
                          "country", "region", "city", "category_list"),
    "funding_rounds.csv": ("uuid", "org_uuid", "investment_type", "announced_on",
                           "raised_amount_usd"),
    "investments.csv": ("funding_round_uuid", "investor_uuid"),
    "acquisitions.csv": ("acquiree_uuid", "acquired_on"),
    "ipos.csv": ("org_uuid", "went_public_on"),
    "founders.csv": ("person_uuid", "org_uuid"),
    "news.csv": ("org_uuid", "posted_on"),
}
GROUND_TRUTH_FILE = "ground_truth.csv"


class DataError(ValueError):
    """Input data cannot be loaded (missing file, broken header, ...)."""


class RoundType(enum.Enum):
    SEED = "Seed"
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E = "E"
    F = "F"
    G = "G"
    H = "H"
    I = "I"  # noqa: E741
    J = "J"
    OTHER_EQUITY = "OtherEquity"
    DEBT = "Debt"
    NON_EQUITY = "NonEquity"
    CORPORATE = "Corporate"
    CONVERTIBLE = "Convertible"
    PRE_SEED = "PreSeed"
    UNKNOWN = "Unknown"


LETTERED = (RoundType.SEED, RoundType.A, RoundType.B, RoundType.C, RoundType.D,
            RoundType.E, RoundType.F, RoundType.G, RoundType.H, RoundType.I,
            RoundType.J)

_TYPE_ALIASES = {
    "seed": RoundType.SEED,
    "angel": RoundType.SEED,
    "pre_seed": RoundType.PRE_SEED,
    "preseed": RoundType.PRE_SEED,
    "convertible_note": RoundType.CONVERTIBLE,
    "convertible": RoundType.CONVERTIBLE,
    "debt_financing": RoundType.DEBT,
    "post_ipo_debt": RoundType.DEBT,
    "debt": RoundType.DEBT,
    "non_equity_assistance": RoundType.NON_EQUITY,
    "grant": RoundType.NON_EQUITY,
    "product_crowdfunding": RoundType.NON_EQUITY,
    "nonequity": RoundType.NON_EQUITY,
    "corporate_round": RoundType.CORPORATE,
    "corporate": RoundType.CORPORATE,
    "private_equity": RoundType.OTHER_EQUITY,
    "post_ipo_equity": RoundType.OTHER_EQUITY,
    "post_ipo_secondary": RoundType.OTHER_EQUITY,
    "equity_crowdfunding": RoundType.OTHER_EQUITY,
    "initial_coin_offering": RoundType.OTHER_EQUITY,
    "secondary_market": RoundType.OTHER_EQUITY,
    "series_unknown": RoundType.OTHER_EQUITY,
    "venture": RoundType.OTHER_EQUITY,
    "venture_round": RoundType.OTHER_EQUITY,
    "otherequity": RoundType.OTHER_EQUITY,
    "undisclosed": RoundType.UNKNOWN,
    "unknown": RoundType.UNKNOWN,
}


def parse_round_type(text: str) -> RoundType:
    """Map a raw investment-type string onto :class:`RoundType`.

    Accepts Crunchbase codes (``series_a``), display names (``Series A+``)
    and bare letters. Anything unrecognised maps to ``UNKNOWN``.
    """
    key = text.strip().lower().replace("-", "_").replace(" ", "_")
    if key in _TYPE_ALIASES:
        return _TYPE_ALIASES[key]
    for prefix in ("series_", ""):
        if key.startswith(prefix):
            rest = key[len(prefix):].rstrip("+")
            if len(rest) == 1 and "a" <= rest <= "j":
                return RoundType(rest.upper())
    try:
        return RoundType(text.strip())
    except ValueError:
        return RoundType.UNKNOWN


class ExitKind(enum.Enum):
    IPO = "IPO"
    ACQUISITION = "Acquisition"


@dataclass(frozen=True)
class Company:
    id: str
    name: str
    founded: date | None
    country: str | None = None
    province: str | None = None
    city: str | None = None
    industries: frozenset[str] = frozenset()
    closed: date | None = None

    def area_key(self, level: str) -> str | None:
        """Qualified area identifier at ``"province"`` or ``"city"`` level."""
        if self.province is None:
            return None
        if level == "province":
            return f"{self.country or ''}|{self.province}"
        if level == "city":
            if self.city is None:
                return None
            return f"{self.country or ''}|{self.province}|{self.city}"
        raise ValueError(f"unknown area level {level!r}")


@dataclass(frozen=True)
class FundingRound:
    id: str
    company_id: str
    round_type: RoundType
    announced: date
    raised_usd: float | None = None
    investor_ids: frozenset[str] = frozenset()


@dataclass(frozen=True)
class ExitEvent:
    company_id: str
    kind: ExitKind
    date: date


@dataclass(frozen=True)
class FounderRecord:
    person_id: str
    foundings: tuple[tuple[str, date | None], ...]


@dataclass(frozen=True)
class NewsItem:
    company_id: str
    date: date


def month_index(d: date) -> int:
    return d.year * 12 + d.month


def months_between(earlier: date, later: date) -> int:
    """Month-index difference, ignoring day of month."""
    return month_index(later) - month_index(earlier)


@dataclass(frozen=True, eq=False)
class EntityStore:
    """Immutable indexed collection of companies and their events.

    Equality compares entity content only; the load/filter report and
    indexes are ignored.
    """

    companies: Mapping[str, Company]
    rounds: tuple[FundingRound, ...]
    exits: tuple[ExitEvent, ...]
    founders: tuple[FounderRecord, ...]
    news: tuple[NewsItem, ...]
    ground_truth: Mapping[tuple[str, int], float] | None = None
    report: Mapping = field(default_factory=dict)

    @classmethod
    def build(cls, companies: Iterable[Company], rounds: Iterable[FundingRound] = (),
              exits: Iterable[ExitEvent] = (), founders: Iterable[FounderRecord] = (),
              news: Iterable[NewsItem] = (), ground_truth=None, report=None) -> "EntityStore":
        comp = {c.id: c for c in sorted(companies, key=lambda c: c.id)}
        rounds = tuple(sorted(rounds, key=lambda r: (r.company_id, r.announced, r.id)))
        exits = tuple(sorted(exits, key=lambda e: (e.company_id, e.date, e.kind.value)))
        founders = tuple(sorted(founders, key=lambda f: f.person_id))
        news = tuple(sorted(news, key=lambda n: (n.company_id, n.date)))
        gt = None
        if ground_truth is not None:
            gt = MappingProxyType(dict(sorted(ground_truth.items())))
        return cls(MappingProxyType(comp), rounds, exits, founders, news, gt,
                   MappingProxyType(dict(report or {})))

    def __post_init__(self):
        comp = self.companies
        for r in self.rounds:
            if r.company_id not in comp:
                raise ValueError(f"round {r.id} references unknown company {r.company_id}")
            if r.raised_usd is not None and r.raised_usd < 0:
                raise ValueError(f"round {r.id} has negative amount")
        ipo_seen = set()
        for e in self.exits:
            if e.company_id not in comp:
                raise ValueError(f"exit references unknown company {e.company_id}")
            if e.kind is ExitKind.IPO:
                if e.company_id in ipo_seen:
                    raise ValueError(f"company {e.company_id} has more than one IPO")
                ipo_seen.add(e.company_id)
        for f in self.founders:
            for cid, _ in f.foundings:
                if cid not in comp:
                    raise ValueError(f"founder {f.person_id} references unknown company {cid}")
        for n in self.news:
            if n.company_id not in comp:
                raise ValueError(f"news references unknown company {n.company_id}")

        rounds_by_company = defaultdict(list)
        deals_by_investor = defaultdict(list)
        for r in self.rounds:
            rounds_by_company[r.company_id].append(r)
            for inv in r.investor_ids:
                deals_by_investor[inv].append((r.announced, r.company_id, r.id))
        exits_by_company = defaultdict(list)
        for e in self.exits:
            exits_by_company[e.company_id].append(e)
        news_by_company = defaultdict(list)
        for n in self.news:
            news_by_company[n.company_id].append(n.date)
        founders_by_company = defaultdict(list)
        for f in self.founders:
            for cid, _ in f.foundings:
                founders_by_company[cid].append(f.person_id)
        by_area = defaultdict(list)
        by_year = defaultdict(list)
        for c in comp.values():
            for level in ("province", "city"):
                key = c.area_key(level)
                if key is not None:
                    by_area[(level, key)].append(c.id)
            if c.founded is not None:
                by_year[c.founded.year].append(c.id)

        def freeze(d, conv=tuple):
            return MappingProxyType({k: conv(v) for k, v in d.items()})

        set_ = object.__setattr__
        set_(self, "rounds_by_company", freeze(rounds_by_company))
        set_(self, "round_dates_by_company",
             MappingProxyType({k: tuple(r.announced for r in v)
                               for k, v in rounds_by_company.items()}))
        set_(self, "deals_by_investor", freeze(deals_by_investor, lambda v: tuple(sorted(v))))
        set_(self, "exits_by_company", freeze(exits_by_company))
        set_(self, "news_dates_by_company", freeze(news_by_company))
        set_(self, "founders_by_company", freeze(founders_by_company, lambda v: tuple(sorted(set(v)))))
        set_(self, "founder_records", MappingProxyType({f.person_id: f for f in self.founders}))
        set_(self, "companies_by_area", freeze(by_area))
        set_(self, "companies_by_founding_year", freeze(by_year))

    def __eq__(self, other):
        if not isinstance(other, EntityStore):
            return NotImplemented
        return (dict(self.companies) == dict(other.companies)
                and self.rounds == other.rounds and self.exits == other.exits
                and self.founders == other.founders and self.news == other.news
                and (dict(self.ground_truth or {}) == dict(other.ground_truth or {})))

    __hash__ = None

    @property
    def investors(self) -> tuple[str, ...]:
        return tuple(sorted(self.deals_by_investor))

    def counts(self) -> dict:
        return {"companies": len(self.companies), "rounds": len(self.rounds),
                "exits": len(self.exits), "founders": len(self.founders),
                "news": len(self.news)}

    def rounds_before(self, company_id: str, when: date) -> tuple[FundingRound, ...]:
        rounds = self.rounds_by_company.get(company_id, ())
        dates = self.round_dates_by_company.get(company_id, ())
        return rounds[:bisect_left(dates, when)]

    def first_exit_before(self, company_id: str, when: date) -> ExitEvent | None:
        for e in self.exits_by_company.get(company_id, ()):
            if e.date < when:
                return e
        return None

    def news_before(self, company_id: str, when: date) -> int:
        return bisect_left(self.news_dates_by_company.get(company_id, ()), when)

    def replace(self, *, companies=None, rounds=None, exits=None, founders=None,
                news=None) -> "EntityStore":
        """A new store with some collections swapped out (used by perturbation tests)."""
        return EntityStore.build(
            self.companies.values() if companies is None else companies,
            self.rounds if rounds is None else rounds,
            self.exits if exits is None else exits,
            self.founders if founders is None else founders,
            self.news if news is None else news,
            ground_truth=self.ground_truth, report=self.report)


# --------------------------------------------------------------------------
# loading


def parse_date(text: str) -> date | None:
    """Parse ``YYYY-MM-DD`` (a trailing time part is tolerated); empty → None.

    Raises ValueError for anything else, including impossible calendar dates.
    """
    text = text.strip()
    if not text:
        return None
    if len(text) > 10 and text[10] in "T ":
        text = text[:10]
    if len(text) != 10:
        raise ValueError(f"bad date {text!r}")
    return date.fromisoformat(text)


def _parse_amount(text: str) -> float | None:
    text = text.strip()
    if not text:
        return None
    value = float(text)
    if not np.isfinite(value) or value < 0:
        raise ValueError(f"bad amount {text!r}")
    return value


def _opt(text: str | None) -> str | None:
    if text is None:
        return None
    text = text.strip()
    return text or None


def _read_rows(path: str, required: tuple[str, ...]):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{os.path.basename(path)}: missing columns {missing}")
        for row in reader:
            yield row


def load_export(directory: str | os.PathLike) -> EntityStore:
    """Load the seven-file CSV export in ``directory``.

    Malformed rows are skipped, duplicate primary keys keep the first
    occurrence, and rows whose references do not resolve are dropped; every
    such event is counted in ``store.report["load"]``.
    """
    directory = os.fspath(directory)
    for name in REQUIRED_FILES:
        if not os.path.isfile(os.path.join(directory, name)):
            raise DataError(f"missing required file {name} in {directory}")

    report = {name: Counter() for name in REQUIRED_FILES}

    def rows(name):
        for i, row in enumerate(_read_rows(os.path.join(directory, name), REQUIRED_FILES[name])):
            report[name]["rows"] += 1
            yield i, row

    def malformed(name, i, exc):
        report[name]["malformed"] += 1
        logger.warning("%s row %d skipped: %s", name, i + 2, exc)

    companies: dict[str, Company] = {}
    for i, row in rows("organizations.csv"):
        try:
            cid = row["uuid"].strip()
            if not cid:
                raise ValueError("empty uuid")
            tags = frozenset(t.strip() for t in (row["category_list"] or "").split("|") if t.strip())
            comp = Company(id=cid, name=(row["name"] or "").strip(),
                           founded=parse_date(row["founded_on"] or ""),
                           country=_opt(row["country"]), province=_opt(row["region"]),
                           city=_opt(row["city"]), industries=tags,
                           closed=parse_date(row["closed_on"] or ""))
        except (ValueError, AttributeError) as exc:
            malformed("organizations.csv", i, exc)
            continue
        if cid in companies:
            report["organizations.csv"]["duplicate"] += 1
            continue
        companies[cid] = comp

    raw_rounds: dict[str, dict] = {}
    for i, row in rows("funding_rounds.csv"):
        try:
            rid = row["uuid"].strip()
            if not rid:
                raise ValueError("empty uuid")
            announced = parse_date(row["announced_on"] or "")
            if announced is None:
                raise ValueError("missing announced_on")
            rec = dict(id=rid, company_id=row["org_uuid"].strip(),
                       round_type=parse_round_type(row["investment_type"] or ""),
                       announced=announced,
                       raised_usd=_parse_amount(row["raised_amount_usd"] or ""))
        except (ValueError, AttributeError) as exc:
            malformed("funding_rounds.csv", i, exc)
            continue
        if rid in raw_rounds:
            report["funding_rounds.csv"]["duplicate"] += 1
            continue
        if rec["company_id"] not in companies:
            report["funding_rounds.csv"]["dangling"] += 1
            continue
        rec["investors"] = set()
        raw_rounds[rid] = rec

    seen_pairs = set()
    for i, row in rows("investments.csv"):
        rid = (row["funding_round_uuid"] or "").strip()
        inv = (row["investor_uuid"] or "").strip()
        if not rid or not inv:
            malformed("investments.csv", i, "empty key")
            continue
        if (rid, inv) in seen_pairs:
            report["investments.csv"]["duplicate"] += 1
            continue
        seen_pairs.add((rid, inv))
        if rid not in raw_rounds:
            report["investments.csv"]["dangling"] += 1
            continue
        raw_rounds[rid]["investors"].add(inv)

    rounds = []
    for rec in raw_rounds.values():
        investors = frozenset(rec.pop("investors"))
        rounds.append(FundingRound(investor_ids=investors, **rec))

    exits = []
    for i, row in rows("acquisitions.csv"):
        try:
            cid = row["acquiree_uuid"].strip()
            d = parse_date(row["acquired_on"] or "")
            if d is None:
                raise ValueError("missing acquired_on")
        except (ValueError, AttributeError) as exc:
            malformed("acquisitions.csv", i, exc)
            continue
        if cid not in companies:
            report["acquisitions.csv"]["dangling"] += 1
            continue
        exits.append(ExitEvent(cid, ExitKind.ACQUISITION, d))

    ipo_seen = set()
    for i, row in rows("ipos.csv"):
        try:
            cid = row["org_uuid"].strip()
            d = parse_date(row["went_public_on"] or "")
            if d is None:
                raise ValueError("missing went_public_on")
        except (ValueError, AttributeError) as exc:
            malformed("ipos.csv", i, exc)
            continue
        if cid in ipo_seen:
            report["ipos.csv"]["duplicate"] += 1
            continue
        if cid not in companies:
            report["ipos.csv"]["dangling"] += 1
            continue
        ipo_seen.add(cid)
        exits.append(ExitEvent(cid, ExitKind.IPO, d))

    foundings = defaultdict(list)
    for i, row in rows("founders.csv"):
        pid = (row["person_uuid"] or "").strip()
        cid = (row["org_uuid"] or "").strip()
        if not pid or not cid:
            malformed("founders.csv", i, "empty key")
            continue
        if cid not in companies:
            report["founders.csv"]["dangling"] += 1
            continue
        if any(c == cid for c, _ in foundings[pid]):
            report["founders.csv"]["duplicate"] += 1
            continue
        foundings[pid].append((cid, companies[cid].founded))
    founders = [FounderRecord(pid, tuple(sorted(f, key=_founding_key)))
                for pid, f in foundings.items()]

    news = []
    for i, row in rows("news.csv"):
        try:
            cid = row["org_uuid"].strip()
            d = parse_date(row["posted_on"] or "")
            if d is None:
                raise ValueError("missing posted_on")
        except (ValueError, AttributeError) as exc:
            malformed("news.csv", i, exc)
            continue
        if cid not in companies:
            report["news.csv"]["dangling"] += 1
            continue
        news.append(NewsItem(cid, d))

    ground_truth = None
    gt_path = os.path.join(directory, GROUND_TRUTH_FILE)
    if os.path.isfile(gt_path):
        ground_truth = {}
        for row in _read_rows(gt_path, ("company_id", "window_index", "latent_probability")):
            ground_truth[(row["company_id"], int(row["window_index"]))] = float(row["latent_probability"])

    load_report = {name: dict(sorted(c.items())) for name, c in report.items()}
    return EntityStore.build(companies.values(), rounds, exits, founders, news,
                             ground_truth=ground_truth, report={"load": load_report})


def _founding_key(item):
    cid, founded = item
    return (founded or date.min, cid)


def filter_companies(store: EntityStore) -> EntityStore:
    """Drop companies with no founding date or founded before 1990.

    Dependent rounds, exits, news and founder links go with them. Removal
    counts by reason land in ``report["filter"]``.
    """
    reasons = Counter()
    keep = {}
    for cid, c in store.companies.items():
        if c.founded is None:
            reasons["missing_founded"] += 1
        elif c.founded < MIN_FOUNDED:
            reasons["founded_before_1990"] += 1
        else:
            keep[cid] = c
    rounds = [r for r in store.rounds if r.company_id in keep]
    exits = [e for e in store.exits if e.company_id in keep]
    news = [n for n in store.news if n.company_id in keep]
    founders = []
    for f in store.founders:
        kept = tuple(x for x in f.foundings if x[0] in keep)
        if kept:
            founders.append(FounderRecord(f.person_id, kept))
    reasons["dropped_rounds"] = len(store.rounds) - len(rounds)
    reasons["dropped_exits"] = len(store.exits) - len(exits)
    reasons["dropped_news"] = len(store.news) - len(news)
    reasons["dropped_founders"] = len(store.founders) - len(founders)
    gt = None
    if store.ground_truth is not None:
        gt = {k: v for k, v in store.ground_truth.items() if k[0] in keep}
    report = dict(store.report)
    report["filter"] = {k: reasons[k] for k in sorted(reasons)}
    report["filter"]["companies_remaining"] = len(keep)
    return EntityStore.build(keep.values(), rounds, exits, founders, news,
                             ground_truth=gt, report=report)


# --------------------------------------------------------------------------
# Table-1 style interval statistics


@dataclass(frozen=True)
class IntervalRow:
    pair: str
    n: int
    mean_months: float
    median_months: float
    p90_months: float
    within_18_fraction: float


def round_intervals(store: EntityStore) -> dict[str, list[int]]:
    """Month gaps between the first rounds of consecutive lettered types, per pair."""
    out: dict[str, list[int]] = {}
    for cid in store.companies:
        first: dict[RoundType, date] = {}
        for r in store.rounds_by_company.get(cid, ()):
            if r.round_type in LETTERED and r.round_type not in first:
                first[r.round_type] = r.announced
        for prev, nxt in zip(LETTERED[:-1], LETTERED[1:]):
            if prev in first and nxt in first:
                gap = months_between(first[prev], first[nxt])
                if gap >= 0:
                    out.setdefault(f"{prev.value}->{nxt.value}", []).append(gap)
    return out


def round_interval_stats(store: EntityStore, horizon: int = 18) -> list[IntervalRow]:
    """Mean/median/90th-percentile gap per consecutive round pair, plus the
    share of gaps at or below ``horizon`` months. Pairs with no data are omitted."""
    gaps = round_intervals(store)
    rows = []
    for prev, nxt in zip(LETTERED[:-1], LETTERED[1:]):
        key = f"{prev.value}->{nxt.value}"
        if key not in gaps:
            continue
        arr = np.asarray(gaps[key], dtype=float)
        rows.append(IntervalRow(key, len(arr), float(arr.mean()), float(np.median(arr)),
                                float(np.percentile(arr, 90)), float(np.mean(arr <= horizon))))
    return rows


def interval_table_csv(rows: list[IntervalRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["funding_round", "n", "mean_months", "median_months", "p90_months",
                    "within_18_months"])
        for r in rows:
            w.writerow([r.pair, r.n, f"{r.mean_months:.2f}", f"{r.median_months:.1f}",
                        f"{r.p90_months:.1f}", f"{r.within_18_fraction:.4f}"])
