"""Seeded random search over a small declarative parameter space.

A space maps parameter names to one of
  ("int", lo, hi)            inclusive integer range
  ("float", lo, hi)          uniform
  ("logfloat", lo, hi)       log-uniform
  ("choice", [v0, v1, ...])
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


def _sample(spec, rng):
    kind = spec[0]
    if kind == "int":
        return int(rng.integers(spec[1], spec[2] + 1))
    if kind == "float":
        return float(rng.uniform(spec[1], spec[2]))
    if kind == "logfloat":
        return float(math.exp(rng.uniform(math.log(spec[1]), math.log(spec[2]))))
    if kind == "choice":
        opts = list(spec[1])
        return opts[int(rng.integers(len(opts)))]
    raise ValueError(f"unknown search dimension {spec!r}")


def sample_space(space: dict, rng) -> dict:
    # sorted names so the draw order never depends on dict construction
    return {name: _sample(space[name], rng) for name in sorted(space)}


@dataclass
class Trial:
    index: int
    params: dict
    score: float


@dataclass
class TuneResult:
    best_params: dict
    best_score: float
    trials: list[Trial] = field(default_factory=list)

    def write_log(self, path):
        names = sorted({k for t in self.trials for k in t.params})
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trial", "score", *names])
            for t in self.trials:
                w.writerow([t.index, repr(float(t.score)),
                            *[json.dumps(t.params.get(n)) for n in names]])


def random_search(objective: Callable[[dict], float], space: dict, budget: int, seed: int = 0,
                  initial_trials=()) -> TuneResult:
    """Maximise ``objective`` over ``budget`` trials.

    ``initial_trials`` are evaluated first and count toward the budget. Ties
    keep the earliest trial.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = np.random.default_rng(seed)
    trials: list[Trial] = []
    best = None
    schedule = [dict(p) for p in initial_trials][:budget]
    while len(schedule) < budget:
        schedule.append(sample_space(space, rng))
    for i, params in enumerate(schedule):
        score = float(objective(params))
        if not math.isfinite(score):
            score = -math.inf
        trials.append(Trial(i, params, score))
        if best is None or score > best.score:
            best = trials[-1]
    return TuneResult(dict(best.params), best.score, trials)
