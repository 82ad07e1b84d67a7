"""
From an event export to a labelled factor matrix
================================================

Generate a synthetic export, cut it into 18-month evaluation windows, and
compute the 19 factors for every (company, window) sample.
"""

import numpy as np

from startup_success.features import FEATURE_NAMES, feature_matrix
from startup_success.ingest import filter_companies, round_interval_stats
from startup_success.synth import SynthConfig, generate
from startup_success.windows import build_samples, label_distribution

# a small store keeps this quick; the acceptance suite uses 50k companies
store = filter_companies(generate(SynthConfig(n_companies=6000, seed=1)))
print(f"{len(store.companies)} companies, {len(store.rounds)} funding rounds")

# how long companies wait between lettered rounds
for row in round_interval_stats(store)[:3]:
    print(row)

# one sample per eligible company per window; the label looks only inside the window
samples = build_samples(store)
for row in label_distribution(samples):
    print(f"{row['t_s']:>10} {row['success']:6d} {row['fail']:6d} {row['success_pct']:6.2f}%")

# factors use only events strictly before each window's start
ds = feature_matrix(store, samples)
missing = np.isnan(ds.X).mean(axis=0)
for name, frac in zip(FEATURE_NAMES, missing):
    print(f"{name:36s} missing {frac:5.1%}")
