"""Seeded synthetic venture ecosystem with a planted logistic ground truth.

Companies, founders, news and first rounds are drawn up front. Then the
simulation walks forward one 18-month period at a time: at each period
start it computes the 19 factors for every eligible company from the
events generated so far, turns them into a success probability with
:func:`latent_logit`, and draws whether a round, acquisition or IPO lands
inside the period. Failing companies may close. Because the factors only
look before the period start, the recorded probabilities are exactly a
logistic function of the factors computed on the final store.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import asdict, dataclass, field, replace
from datetime import date, timedelta

import numpy as np
from scipy.special import ndtr

from .features import FEATURE_INDEX, feature_rows, format_value
from .ingest import (LETTERED, Company, EntityStore, ExitEvent, ExitKind, FounderRecord,
                     FundingRound, NewsItem, RoundType)
from .windows import N_WINDOWS, WINDOW_MONTHS, eligible_companies, window_end, window_schedule

SIM_END = date(2020, 6, 30)

# name -> (feature, transform, neutral transformed value, missingness family)
LATENT_TERMS = {
    "company_age": ("company_age_months", "log1p", 3.5, None),
    "news": ("monthly_avg_news", "log1p_per_year", 0.5, None),
    "rounds": ("num_funding_rounds", "log1p", 0.7, None),
    "raised": ("total_raised_usd", "log1p_millions", 1.0, "amount"),
    "investor_ipo": ("max_investor_ipo_fraction", "identity", 0.05, "investors"),
    "investor_acq": ("max_investor_acq_fraction", "identity", 0.1, "investors"),
    "founder_fail": ("mean_founder_fail_fraction", "identity", 0.2, "founders"),
    "city_prosperity": ("city_prosperity", "log1p", 4.0, "city"),
    "industry_prosperity": ("max_industry_prosperity_province", "log1p", 2.0, "industry"),
}

DEFAULT_EFFECTS = {
    "company_age": -0.45,
    "news": 0.8,
    "rounds": 0.35,
    "raised": 0.45,
    "investor_ipo": 3.0,
    "investor_acq": 2.0,
    "founder_fail": -2.0,
    "city_prosperity": 0.03,
    "industry_prosperity": 0.03,
}

MISSING_FAMILIES = ("amount", "investors", "founders", "city", "industry")

DEFAULT_MISSING_RATES = {"amount": 0.3, "investors": 0.3, "founders": 0.3, "city": 0.15,
                         "industry": 0.1}

# logit penalty for a missing family when missingness is informative
DEFAULT_MISSING_PENALTY = {"amount": 0.6, "investors": 0.9, "founders": 1.2, "city": 0.0,
                           "industry": 0.0}

COUNTRIES = ("USA", "GBR", "CHN", "DEU", "IND")
INDUSTRIES = ("Software", "Health Care", "Fintech", "E-Commerce", "Biotechnology",
              "Artificial Intelligence", "Education", "Energy", "Hardware", "Media",
              "Real Estate", "Transportation", "Food", "Gaming", "Security", "Robotics",
              "Agriculture", "Travel", "Marketing", "Manufacturing")
_SYLLABLES = ("ka", "lo", "mi", "zen", "tra", "vo", "qui", "nex", "ar", "bel", "cor", "dyn",
              "el", "fy", "gen", "hal", "io", "jet", "kin", "lum", "mo", "nov", "or", "pix",
              "ra", "sol", "tek", "ul", "ver", "wa", "xi", "yo", "zu")
_SUFFIXES = ("Labs", "AI", "Systems", "Health", "Works", "Technologies", "Inc", "Bio",
             "Networks", "Robotics", "Pay", "Cloud", "Energy", "Media", "Foods")

ROUND_CODES = {
    RoundType.SEED: "seed", RoundType.PRE_SEED: "pre_seed",
    RoundType.CONVERTIBLE: "convertible_note", RoundType.DEBT: "debt_financing",
    RoundType.NON_EQUITY: "grant", RoundType.CORPORATE: "corporate_round",
    RoundType.OTHER_EQUITY: "private_equity", RoundType.UNKNOWN: "undisclosed",
}
for _rt in LETTERED[1:]:
    ROUND_CODES[_rt] = "series_" + _rt.value.lower()


class SynthConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n_companies: int = 50000
    year_range: tuple[int, int] = (1990, 2018)
    n_investors: int = 2000
    n_founders: int = 45000
    founding_growth: float = 0.15
    never_funded: float = 0.25
    first_round_delay_months: float = 10.0
    news_rate: float = 0.05
    base_intercept: float = -1.1
    intercept_spread: float = 0.25
    effects: dict = field(default_factory=lambda: dict(DEFAULT_EFFECTS))
    missing_rates: dict = field(default_factory=lambda: dict(DEFAULT_MISSING_RATES))
    missing_penalty: dict = field(default_factory=lambda: dict(DEFAULT_MISSING_PENALTY))
    informative_missingness: bool = False
    informative_strength: float = 1.0
    assortativity: float = 0.7
    closure_intercept: float = -1.6
    outcome_mix: tuple[float, float, float] = (0.85, 0.12, 0.03)
    seed: int = 0

    def __post_init__(self):
        if self.n_companies < 1:
            raise SynthConfigError("n_companies must be at least 1")
        if self.n_investors < 1 or self.n_founders < 1:
            raise SynthConfigError("n_investors and n_founders must be at least 1")
        lo, hi = self.year_range
        if not 1990 <= lo <= hi <= 2020:
            raise SynthConfigError("year_range must lie within [1990, 2020]")
        for name, rate in self.missing_rates.items():
            if name not in MISSING_FAMILIES:
                raise SynthConfigError(f"unknown missingness family {name!r}")
            if not 0.0 <= rate <= 1.0:
                raise SynthConfigError(f"missingness rate for {name} must lie in [0, 1]")
        for name in self.effects:
            if name not in LATENT_TERMS:
                raise SynthConfigError(f"unknown latent effect {name!r}")
        for name in self.missing_penalty:
            if name not in MISSING_FAMILIES:
                raise SynthConfigError(f"unknown missingness family {name!r}")
        if not 0.0 <= self.never_funded <= 1.0:
            raise SynthConfigError("never_funded must lie in [0, 1]")
        mix = self.outcome_mix
        if len(mix) != 3 or min(mix) < 0 or not math.isclose(sum(mix), 1.0):
            raise SynthConfigError("outcome_mix needs three non-negative shares summing to 1")
        if not -1.0 <= self.assortativity <= 1.0:
            raise SynthConfigError("assortativity must lie in [-1, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["year_range"] = list(self.year_range)
        d["outcome_mix"] = list(self.outcome_mix)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        if "year_range" in d:
            d["year_range"] = tuple(d["year_range"])
        if "outcome_mix" in d:
            d["outcome_mix"] = tuple(d["outcome_mix"])
        for key, default in (("effects", DEFAULT_EFFECTS), ("missing_rates", DEFAULT_MISSING_RATES),
                             ("missing_penalty", DEFAULT_MISSING_PENALTY)):
            if key in d:
                merged = dict(default)
                merged.update(d[key])
                d[key] = merged
        return cls(**d)

    @classmethod
    def from_flat(cls, items: dict) -> "SynthConfig":
        """Build from string key/value pairs, e.g. an INI section.

        Nested settings use dotted keys: ``effect.news``, ``missing.city``,
        ``penalty.founders``; ``year_range`` and ``outcome_mix`` are comma lists.
        """
        base = cls()
        d: dict = {"effects": {}, "missing_rates": {}, "missing_penalty": {}}
        nested = {"effect": "effects", "missing": "missing_rates", "penalty": "missing_penalty"}
        for key, raw in items.items():
            key = key.strip()
            raw = str(raw).strip()
            if "." in key:
                group, name = key.split(".", 1)
                if group not in nested:
                    raise SynthConfigError(f"unknown setting {key!r}")
                d[nested[group]][name] = float(raw)
                continue
            if not hasattr(base, key):
                raise SynthConfigError(f"unknown setting {key!r}")
            current = getattr(base, key)
            if key in ("year_range", "outcome_mix"):
                conv = int if key == "year_range" else float
                d[key] = tuple(conv(v) for v in raw.split(","))
            elif isinstance(current, bool):
                if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise SynthConfigError(f"{key} expects a boolean, got {raw!r}")
                d[key] = raw.lower() in ("true", "1", "yes")
            elif isinstance(current, int):
                d[key] = int(raw)
            else:
                d[key] = float(raw)
        return cls.from_dict(d)


# --------------------------------------------------------------------------
# ground truth


def _transform(kind, x):
    if kind == "log1p":
        return np.log1p(x)
    if kind == "log1p_per_year":
        return np.log1p(12.0 * x)
    if kind == "log1p_millions":
        return np.log1p(x / 1e6)
    return x


def latent_logit(X, intercept, config: SynthConfig) -> np.ndarray:
    """Planted success log-odds for factor rows ``X`` (NaN = missing).

    Present factors contribute ``effect * transform(value)``. A missing
    factor contributes ``effect * neutral`` and, with informative
    missingness, minus the family penalty (once per family).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    z = np.zeros(X.shape[0]) + intercept
    penalised = {}
    for name, (feat, kind, neutral, family) in LATENT_TERMS.items():
        beta = config.effects.get(name, 0.0)
        x = X[:, FEATURE_INDEX[feat]]
        miss = np.isnan(x)
        g = _transform(kind, np.where(miss, 0.0, x))
        z += beta * np.where(miss, neutral, g)
        if family is not None:
            penalised[family] = penalised.get(family, np.zeros_like(miss)) | miss
    if config.informative_missingness:
        for family, miss in penalised.items():
            z -= config.missing_penalty.get(family, 0.0) * miss
    return z


def latent_probability(X, intercept, config: SynthConfig) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-latent_logit(X, intercept, config)))


def window_intercepts(config: SynthConfig) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 7]))
    return config.base_intercept + config.intercept_spread * rng.standard_normal(N_WINDOWS)


# --------------------------------------------------------------------------
# generation


def _add_months(d: date, months: int) -> date:
    m = d.year * 12 + d.month - 1 + months
    return date(m // 12, m % 12 + 1, 1)


def _periods():
    """(index, t_s, t_f) for every 18-month period; negative indices precede the study."""
    first = window_schedule()[0].t_s
    out = []
    k = -1
    while _add_months(first, k * WINDOW_MONTHS) >= date(1989, 1, 1):
        k -= 1
    for idx in range(k + 1, N_WINDOWS):
        t_s = _add_months(first, idx * WINDOW_MONTHS)
        out.append((idx, t_s, window_end(t_s)))
    return out


def _miss_prob(rate, u, config):
    if not config.informative_missingness or rate in (0.0, 1.0):
        return np.full_like(u, rate)
    lo = math.log(rate / (1 - rate))
    return 1.0 / (1.0 + np.exp(-(lo - config.informative_strength * u)))


def _name(rng) -> str:
    syl = rng.integers(0, len(_SYLLABLES), size=int(rng.integers(2, 4)))
    stem = "".join(_SYLLABLES[i] for i in syl).capitalize()
    return f"{stem} {_SUFFIXES[int(rng.integers(len(_SUFFIXES)))]}"


class _Builder:
    def __init__(self, config: SynthConfig):
        self.cfg = config
        ss = np.random.SeedSequence(config.seed)
        (self.r_struct, self.r_news, self.r_found, self.r_first,
         self.r_sim) = [np.random.default_rng(s) for s in ss.spawn(5)]
        self.rounds: list[FundingRound] = []
        self.exits: list[ExitEvent] = []
        self.closed: dict[str, date] = {}
        self.n_rounds = 0

    # -- static structure --------------------------------------------------

    def companies(self):
        cfg, rng = self.cfg, self.r_struct
        n = cfg.n_companies
        lo, hi = cfg.year_range
        years = np.arange(lo, hi + 1)
        wy = np.exp(cfg.founding_growth * (years - lo))
        year = rng.choice(years, size=n, p=wy / wy.sum())
        start = np.array([date(int(y), 1, 1).toordinal() for y in year])
        length = np.array([date(int(y) + 1, 1, 1).toordinal() for y in year]) - start
        founded_ord = start + (rng.random(n) * length).astype(np.int64)
        u = rng.standard_normal(n)
        order = np.argsort(founded_ord, kind="stable")
        founded_ord, u = founded_ord[order], u[order]
        self.u = u
        self.founded_ord = founded_ord
        self.ids = [f"c{i:06d}" for i in range(n)]

        n_prov = 5
        n_city = 4
        country = rng.choice(len(COUNTRIES), size=n, p=_zipf(len(COUNTRIES)))
        prov = rng.choice(n_prov, size=n, p=_zipf(n_prov))
        city = rng.choice(n_city, size=n, p=_zipf(n_city))
        city_missing = rng.random(n) < _miss_prob(cfg.missing_rates.get("city", 0.0), u, cfg)
        ind_missing = rng.random(n) < _miss_prob(cfg.missing_rates.get("industry", 0.0), u, cfg)
        n_tags = 1 + (rng.random(n) < 0.5) + (rng.random(n) < 0.2)
        tag_p = _zipf(len(INDUSTRIES), 0.8)
        comps = []
        for i in range(n):
            cc = COUNTRIES[country[i]]
            tags = frozenset() if ind_missing[i] else frozenset(
                INDUSTRIES[j] for j in rng.choice(len(INDUSTRIES), size=n_tags[i], replace=False,
                                                  p=tag_p))
            comps.append(Company(
                id=self.ids[i], name=_name(rng), founded=date.fromordinal(int(founded_ord[i])),
                country=cc, province=f"{cc}-P{prov[i] + 1}",
                city=None if city_missing[i] else f"{cc}-P{prov[i] + 1}-C{city[i] + 1}",
                industries=tags))
        self.base_companies = comps

    def founders(self):
        cfg, rng = self.cfg, self.r_found
        n = cfg.n_companies
        none = rng.random(n) < _miss_prob(cfg.missing_rates.get("founders", 0.0), self.u, cfg)
        count = 1 + (rng.random(n) < 0.35) + (rng.random(n) < 0.1)
        foundings: dict[str, list] = {}
        for i in range(n):
            if none[i]:
                continue
            people = rng.choice(cfg.n_founders, size=int(count[i]), replace=False)
            for p in sorted(people.tolist()):
                foundings.setdefault(f"p{p:06d}", []).append(i)
        recs = []
        for pid in sorted(foundings):
            items = tuple((self.ids[i], date.fromordinal(int(self.founded_ord[i])))
                          for i in foundings[pid])
            recs.append(FounderRecord(pid, items))
        self.founder_records = recs

    def news(self):
        cfg, rng = self.cfg, self.r_news
        end = SIM_END.toordinal()
        months = np.maximum(end - self.founded_ord, 0) / 30.4375
        lam = cfg.news_rate * np.exp(0.6 * self.u) * months
        counts = rng.poisson(lam)
        items = []
        for i in np.flatnonzero(counts):
            span = end - self.founded_ord[i] + 1
            days = self.founded_ord[i] + np.sort((rng.random(counts[i]) * span).astype(np.int64))
            cid = self.ids[i]
            items.extend(NewsItem(cid, date.fromordinal(int(d))) for d in days)
        self.news_items = items

    # -- rounds --------------------------------------------------------------

    def _investors(self, u, eps, k_draw, miss_u, missing_rate):
        """Investor ids chosen assortatively: latent quality maps to a rank quantile."""
        cfg = self.cfg
        if miss_u < missing_rate:
            return frozenset()
        k = 1 + (k_draw < 0.5) + (k_draw < 0.2)
        rho = cfg.assortativity
        q = ndtr(rho * u + math.sqrt(1 - rho * rho) * eps[:k])
        idx = np.minimum((q * cfg.n_investors).astype(np.int64), cfg.n_investors - 1)
        return frozenset(f"i{j:05d}" for j in idx.tolist())

    def _amount(self, rt: RoundType, u, z, miss_u, missing_rate):
        if miss_u < missing_rate:
            return None
        if rt in (RoundType.SEED, RoundType.PRE_SEED, RoundType.CONVERTIBLE, RoundType.NON_EQUITY):
            mu = 5.7
        elif rt in LETTERED:
            mu = 6.3 + 0.45 * LETTERED.index(rt)
        else:
            mu = 6.8
        return float(round(10 ** (mu + 0.25 * u + 0.4 * z), -3))

    def _new_round(self, i, rt, when, u, draws, miss_amount, miss_inv):
        self.n_rounds += 1
        rid = f"r{self.n_rounds:07d}"
        amt = self._amount(rt, u, draws[0], draws[1], miss_amount)
        inv = self._investors(u, draws[2:5], draws[5], draws[6], miss_inv)
        self.rounds.append(FundingRound(rid, self.ids[i], rt, when, amt, inv))

    def first_rounds(self):
        cfg, rng = self.cfg, self.r_first
        n = cfg.n_companies
        u = self.u
        funded = rng.random(n) >= cfg.never_funded
        delay = rng.exponential(cfg.first_round_delay_months * 30.4375, size=n).astype(np.int64)
        kind = rng.random(n)
        draws = rng.standard_normal((n, 7))
        draws[:, 1] = rng.random(n)
        draws[:, 5] = rng.random(n)
        draws[:, 6] = rng.random(n)
        m_amt = _miss_prob(cfg.missing_rates.get("amount", 0.0), u, cfg)
        m_inv = _miss_prob(cfg.missing_rates.get("investors", 0.0), u, cfg)
        end = SIM_END.toordinal()
        for i in range(n):
            when = self.founded_ord[i] + delay[i]
            if not funded[i] or when > end:
                continue
            k = kind[i]
            rt = (RoundType.SEED if k < 0.6 else RoundType.PRE_SEED if k < 0.7
                  else RoundType.CONVERTIBLE if k < 0.8 else RoundType.A if k < 0.95
                  else RoundType.NON_EQUITY)
            self._new_round(i, rt, date.fromordinal(int(when)), u[i], draws[i],
                            m_amt[i], m_inv[i])

    @staticmethod
    def _next_type(history, k):
        letters = [LETTERED.index(r.round_type) for r in history if r.round_type in LETTERED]
        top = max(letters, default=0)
        if k < 0.1:
            return (RoundType.DEBT, RoundType.CONVERTIBLE, RoundType.CORPORATE,
                    RoundType.OTHER_EQUITY)[int(k * 40)]
        if top + 1 < len(LETTERED):
            return LETTERED[top + 1]
        return RoundType.OTHER_EQUITY

    # -- simulation ----------------------------------------------------------

    def store(self, ground_truth=None) -> EntityStore:
        comps = [replace(c, closed=self.closed[c.id]) if c.id in self.closed else c
                 for c in self.base_companies]
        return EntityStore.build(comps, self.rounds, self.exits, self.founder_records,
                                 self.news_items, ground_truth=ground_truth,
                                 report={"synth": self.cfg.to_dict()})

    def simulate(self):
        cfg = self.cfg
        n = cfg.n_companies
        rng = self.r_sim
        intercepts = window_intercepts(cfg)
        index_of = {cid: i for i, cid in enumerate(self.ids)}
        m_amt = _miss_prob(cfg.missing_rates.get("amount", 0.0), self.u, cfg)
        m_inv = _miss_prob(cfg.missing_rates.get("investors", 0.0), self.u, cfg)
        share_round, share_acq, _ = cfg.outcome_mix
        truth = {}
        for idx, t_s, t_f in _periods():
            # one fixed block of draws per company and period keeps runs coupled
            u_success = rng.random(n)
            u_kind = rng.random(n)
            u_day = rng.random(n)
            u_close = rng.random(n)
            u_type = rng.random(n)
            draws = rng.standard_normal((n, 7))
            draws[:, 1] = rng.random(n)
            draws[:, 5] = rng.random(n)
            draws[:, 6] = rng.random(n)

            store = self.store()
            elig = eligible_companies(store, t_s)
            if not elig:
                continue
            X = feature_rows(store, elig, t_s)
            intercept = intercepts[idx] if idx >= 0 else cfg.base_intercept
            p = latent_probability(X, intercept, cfg)
            span = (t_f - t_s).days + 1
            for cid, prob in zip(elig, p.tolist()):
                i = index_of[cid]
                if idx >= 0:
                    truth[(cid, idx)] = prob
                when = t_s + timedelta(days=int(u_day[i] * span))
                if u_success[i] < prob:
                    history = store.rounds_by_company.get(cid, ())
                    k = u_kind[i]
                    if k < share_round or (k >= share_round + share_acq and len(history) < 2):
                        rt = self._next_type(history, u_type[i])
                        self._new_round(i, rt, when, self.u[i], draws[i], m_amt[i], m_inv[i])
                    elif k < share_round + share_acq:
                        self.exits.append(ExitEvent(cid, ExitKind.ACQUISITION, when))
                    else:
                        self.exits.append(ExitEvent(cid, ExitKind.IPO, when))
                else:
                    p_close = 1.0 / (1.0 + math.exp(-(cfg.closure_intercept - self.u[i])))
                    if u_close[i] < p_close:
                        self.closed[cid] = when
        return truth


def _zipf(k, s=1.0):
    w = 1.0 / np.arange(1, k + 1) ** s
    return w / w.sum()


def generate(config: SynthConfig = SynthConfig()) -> EntityStore:
    """Build a synthetic store; ``store.ground_truth`` maps (company, window) to probability."""
    b = _Builder(config)
    b.companies()
    b.founders()
    b.news()
    b.first_rounds()
    truth = b.simulate()
    return b.store(truth)


# --------------------------------------------------------------------------
# export


def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _d(x):
    return "" if x is None else x.isoformat()


def _status(store, c):
    if c.closed is not None:
        return "closed"
    kinds = {e.kind for e in store.exits_by_company.get(c.id, ())}
    if ExitKind.IPO in kinds:
        return "ipo"
    if ExitKind.ACQUISITION in kinds:
        return "acquired"
    return "operating"


def emit_export(store: EntityStore, directory) -> list[str]:
    """Write the seven-file export (plus ground truth when present) to ``directory``."""
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    if not os.access(directory, os.W_OK):
        raise OSError(f"directory {directory} is not writable")
    written = []

    def out(name):
        path = os.path.join(directory, name)
        written.append(path)
        return path

    _write(out("organizations.csv"),
           ["uuid", "name", "founded_on", "closed_on", "status", "country", "region", "city",
            "category_list"],
           [[c.id, c.name, _d(c.founded), _d(c.closed), _status(store, c), c.country or "",
             c.province or "", c.city or "", "|".join(sorted(c.industries))]
            for c in store.companies.values()])
    rounds = sorted(store.rounds, key=lambda r: r.id)
    _write(out("funding_rounds.csv"),
           ["uuid", "org_uuid", "investment_type", "announced_on", "raised_amount_usd"],
           [[r.id, r.company_id, ROUND_CODES[r.round_type], _d(r.announced),
             "" if r.raised_usd is None else format_value(r.raised_usd)] for r in rounds])
    _write(out("investments.csv"), ["funding_round_uuid", "investor_uuid"],
           [[r.id, inv] for r in rounds for inv in sorted(r.investor_ids)])
    _write(out("acquisitions.csv"), ["acquiree_uuid", "acquired_on"],
           [[e.company_id, _d(e.date)] for e in store.exits if e.kind is ExitKind.ACQUISITION])
    _write(out("ipos.csv"), ["org_uuid", "went_public_on"],
           [[e.company_id, _d(e.date)] for e in store.exits if e.kind is ExitKind.IPO])
    _write(out("founders.csv"), ["person_uuid", "org_uuid"],
           sorted([f.person_id, cid] for f in store.founders for cid, _ in f.foundings))
    _write(out("news.csv"), ["org_uuid", "posted_on"],
           [[n.company_id, _d(n.date)] for n in store.news])
    if store.ground_truth is not None:
        _write(out("ground_truth.csv"), ["company_id", "window_index", "latent_probability"],
               [[cid, w, repr(float(p))] for (cid, w), p in store.ground_truth.items()])
    return written
