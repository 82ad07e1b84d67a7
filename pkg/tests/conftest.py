import csv
import os

import numpy as np
import pytest

from startup_success.features import feature_matrix
from startup_success.ingest import REQUIRED_FILES, filter_companies
from startup_success.synth import SynthConfig, generate
from startup_success.windows import build_samples


def write_export(directory, **tables):
    """Write a seven-file export; ``tables`` maps a file stem to a list of row dicts."""
    os.makedirs(directory, exist_ok=True)
    for name, cols in REQUIRED_FILES.items():
        rows = tables.get(name[:-4], [])
        with open(os.path.join(directory, name), "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({c: r.get(c, "") for c in cols})
    return directory


@pytest.fixture(scope="session")
def small_store():
    return filter_companies(generate(SynthConfig(n_companies=1500, seed=3)))


@pytest.fixture(scope="session")
def small_samples(small_store):
    return build_samples(small_store)


@pytest.fixture(scope="session")
def small_ds(small_store, small_samples):
    return feature_matrix(small_store, small_samples)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
