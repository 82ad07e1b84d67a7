"""Evaluation windows, eligibility, success labels and sample sets."""

from __future__ import annotations

import calendar
import csv
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from .ingest import EntityStore

WINDOW_MONTHS = 18
FIRST_WINDOW_START = date(2000, 1, 1)
N_WINDOWS = 13


@dataclass(frozen=True, order=True)
class TimeWindow:
    index: int
    t_s: date
    t_f: date

    def contains(self, d: date) -> bool:
        return self.t_s <= d <= self.t_f


@dataclass(frozen=True)
class SampleEvent:
    company_id: str
    window: TimeWindow
    label: int
    features: np.ndarray | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SampleSplit:
    train: list
    test: list
    seed: int


def window_end(t_s: date, months: int = WINDOW_MONTHS) -> date:
    """Last day of the ``months``-th month counting ``t_s``'s own month as the first."""
    m = t_s.year * 12 + (t_s.month - 1) + months - 1
    year, month = divmod(m, 12)
    month += 1
    return date(year, month, calendar.monthrange(year, month)[1])


def make_window(index: int, t_s: date) -> TimeWindow:
    return TimeWindow(index, t_s, window_end(t_s))


def window_schedule(start: date = FIRST_WINDOW_START, count: int = N_WINDOWS) -> list[TimeWindow]:
    """Consecutive, non-overlapping 18-month windows; the default covers
    2000-01-01 .. 2019-06-30 in 13 windows."""
    out = []
    t_s = start
    for i in range(count):
        w = make_window(i, t_s)
        out.append(w)
        t_s = w.t_f + timedelta(days=1)
    return out


def next_window(w: TimeWindow) -> TimeWindow:
    return make_window(w.index + 1, w.t_f + timedelta(days=1))


def eligible(store: EntityStore, company_id: str, t_s: date) -> bool:
    """Founded and funded strictly before ``t_s``, and not exited or closed before it."""
    c = store.companies[company_id]
    if c.founded is None or c.founded >= t_s:
        return False
    if c.closed is not None and c.closed < t_s:
        return False
    dates = store.round_dates_by_company.get(company_id, ())
    if not dates or dates[0] >= t_s:
        return False
    return store.first_exit_before(company_id, t_s) is None


def label(store: EntityStore, company_id: str, window: TimeWindow) -> int:
    """1 if a funding round, acquisition or IPO falls within [t_s, t_f]."""
    dates = store.round_dates_by_company.get(company_id, ())
    if bisect_right(dates, window.t_f) > bisect_left(dates, window.t_s):
        return 1
    for e in store.exits_by_company.get(company_id, ()):
        if window.contains(e.date):
            return 1
    return 0


def eligible_companies(store: EntityStore, t_s: date) -> list[str]:
    return [cid for cid in store.companies if eligible(store, cid, t_s)]


def build_samples(store: EntityStore, windows: list[TimeWindow] | None = None) -> list[SampleEvent]:
    """One labelled event per (eligible company, window), ordered by window then id."""
    if windows is None:
        windows = window_schedule()
    out = []
    for w in sorted(windows):
        for cid in eligible_companies(store, w.t_s):  # companies mapping is id-sorted
            out.append(SampleEvent(cid, w, label(store, cid, w)))
    return out


def split_train_test(samples: list, ratio: float = 0.9, seed: int = 0) -> SampleSplit:
    """Seeded uniform shuffle, first ``round(ratio * n)`` go to training."""
    if not samples:
        raise ValueError("cannot split an empty sample list")
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    n = len(samples)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(ratio * n))
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return SampleSplit([samples[i] for i in train_idx], [samples[i] for i in test_idx], seed)


def samples_in(samples, window_indices) -> list:
    wanted = set(window_indices)
    return [s for s in samples if s.window.index in wanted]


def cumulative_training_sets(samples, window_index: int, mode: str,
                             protocol: str = "out-of-sample", seed: int = 0,
                             ratio: float = 0.9) -> list:
    """Training set for the single/multiple window comparison.

    ``protocol="out-of-sample"``: single uses the window right before
    ``window_index``; multiple pools every earlier window. Needs
    ``window_index >= 1``.

    ``protocol="in-sample"``: both use the seeded training part of the
    current window; multiple adds every earlier window on top. At window 0
    the two coincide.
    """
    if mode not in ("single", "multiple"):
        raise ValueError(f"mode must be 'single' or 'multiple', got {mode!r}")
    if protocol == "out-of-sample":
        if window_index < 1:
            raise ValueError("out-of-sample protocol needs window_index >= 1")
        if mode == "single":
            return samples_in(samples, [window_index - 1])
        return samples_in(samples, range(window_index))
    if protocol == "in-sample":
        current = samples_in(samples, [window_index])
        train = split_train_test(current, ratio, seed).train if current else []
        if mode == "single" or window_index == 0:
            return train
        return samples_in(samples, range(window_index)) + train
    raise ValueError(f"unknown protocol {protocol!r}")


def window_test_set(samples, window_index: int, protocol: str = "out-of-sample",
                    seed: int = 0, ratio: float = 0.9) -> list:
    current = samples_in(samples, [window_index])
    if protocol == "out-of-sample":
        return current
    return split_train_test(current, ratio, seed).test if current else []


def label_distribution(samples, windows=None) -> list[dict]:
    """Per-window success/fail counts plus a Total row."""
    if windows is None:
        windows = sorted({s.window for s in samples})
    rows = []
    tot_s = tot_f = 0
    for w in windows:
        labels = [s.label for s in samples if s.window.index == w.index]
        succ = int(sum(labels))
        fail = len(labels) - succ
        tot_s += succ
        tot_f += fail
        rows.append({"t_s": w.t_s.isoformat(), "t_f": w.t_f.isoformat(), "success": succ,
                     "fail": fail, "success_pct": _pct(succ, succ + fail)})
    rows.append({"t_s": "Total", "t_f": "", "success": tot_s, "fail": tot_f,
                 "success_pct": _pct(tot_s, tot_s + tot_f)})
    return rows


def _pct(a, n):
    return round(100.0 * a / n, 2) if n else 0.0


def write_label_distribution(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, ["t_s", "t_f", "success", "fail", "success_pct"],
                           lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
