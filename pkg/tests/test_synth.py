import hashlib
from dataclasses import replace

import numpy as np
import pytest

from startup_success.features import FEATURE_INDEX, feature_rows
from startup_success.ingest import filter_companies, load_export
from startup_success.synth import (DEFAULT_EFFECTS, SynthConfig, SynthConfigError, emit_export,
                                   generate, latent_logit, latent_probability, window_intercepts)
from startup_success.windows import build_samples, window_schedule


def _digest(directory):
    h = hashlib.sha256()
    for p in sorted(directory.iterdir()):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def test_ground_truth_is_latent_of_final_factors(small_store):
    cfg = SynthConfig.from_dict(small_store.report["synth"])
    icpt = window_intercepts(cfg)
    samples = build_samples(small_store)
    keys = {(s.company_id, s.window.index) for s in samples}
    assert keys == set(small_store.ground_truth)
    for w in window_schedule():
        ids = [s.company_id for s in samples if s.window.index == w.index]
        if not ids:
            continue
        p = latent_probability(feature_rows(small_store, ids, w.t_s), icpt[w.index], cfg)
        gt = np.array([small_store.ground_truth[(c, w.index)] for c in ids])
        np.testing.assert_allclose(p, gt, rtol=0, atol=1e-12)


def test_generated_entities_survive_filter(small_store):
    raw = generate(SynthConfig(n_companies=1500, seed=3))
    assert filter_companies(raw) == raw == small_store


def test_emission_is_deterministic(tmp_path):
    cfg = SynthConfig(n_companies=400, n_founders=300, n_investors=50, seed=11)
    emit_export(generate(cfg), tmp_path / "a")
    emit_export(generate(cfg), tmp_path / "b")
    emit_export(generate(replace(cfg, seed=12)), tmp_path / "c")
    assert _digest(tmp_path / "a") == _digest(tmp_path / "b") != _digest(tmp_path / "c")
    back = load_export(tmp_path / "a")
    assert back == generate(cfg)
    assert back.ground_truth is not None


def test_positive_effect_raises_success_rate():
    base = SynthConfig(n_companies=2500, seed=5)
    boosted = replace(base, effects={**DEFAULT_EFFECTS, "news": DEFAULT_EFFECTS["news"] + 1.5})
    rate = lambda cfg: np.mean([s.label for s in build_samples(generate(cfg))])
    assert rate(boosted) > rate(base)


def test_informative_missingness_lowers_logit():
    X = np.full((2, 19), 1.0)
    X[1, FEATURE_INDEX["total_raised_usd"]] = np.nan
    mar = SynthConfig(n_companies=10)
    inf = replace(mar, informative_missingness=True)
    d_mar = latent_logit(X, 0.0, mar)
    d_inf = latent_logit(X, 0.0, inf)
    assert d_inf[0] == d_mar[0]
    assert d_inf[1] == pytest.approx(d_mar[1] - inf.missing_penalty["amount"])


def test_config_validation_and_parsing():
    with pytest.raises(SynthConfigError):
        SynthConfig(year_range=(1980, 2000))
    with pytest.raises(SynthConfigError):
        SynthConfig(missing_rates={"amount": 1.5})
    with pytest.raises(SynthConfigError):
        SynthConfig.from_flat({"bogus": "1"})
    cfg = SynthConfig.from_flat({"n_companies": "123", "effect.news": "2.0", "missing.city": "0.5",
                                 "informative_missingness": "yes", "year_range": "1995,2010"})
    assert cfg.n_companies == 123 and cfg.effects["news"] == 2.0
    assert cfg.effects["rounds"] == DEFAULT_EFFECTS["rounds"]
    assert cfg.missing_rates["city"] == 0.5 and cfg.informative_missingness
    assert cfg.year_range == (1995, 2010)
    assert SynthConfig.from_dict(cfg.to_dict()) == cfg
