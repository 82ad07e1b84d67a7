from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..evaluate import Metrics, f1_from, metrics


@dataclass(frozen=True)
class BaselineResult:
    empirical: Metrics
    expected_precision: float
    expected_recall: float
    expected_f1: float


def expected_random_metrics(base_rate: float):
    """Precision, recall, F1 expected from a fair coin flip per sample."""
    p, r = float(base_rate), 0.5
    return p, r, f1_from(p, r)


def random_baseline(labels, seed: int = 0) -> BaselineResult:
    y = np.asarray(labels).astype(np.int8)
    rng = np.random.default_rng(seed)
    guesses = rng.random(y.size) < 0.5
    emp = metrics(guesses.astype(float), y, 0.5)
    p, r, f1 = expected_random_metrics(y.mean() if y.size else 0.0)
    return BaselineResult(emp, p, r, f1)
