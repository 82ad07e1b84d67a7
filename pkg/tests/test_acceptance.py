"""End-to-end acceptance checks, one printed PASS/FAIL line per criterion.

Heavy data (two 50k-company synthetic stores) is built once per session.
Where a criterion depends on shared data or shared models, their build time
is charged to its runtime budget.
"""

import os
import time

import numpy as np
import pytest
from scipy.stats import binomtest, spearmanr

from helpers import (ACCEPTANCE_LINES, compare_split, perturb_after, random_ensemble,
                     split_fixture, verdict)
from oracles import gradient_check
from startup_success.cli import main as cli
from startup_success.evaluate import auc, metrics
from startup_success.explain import shapley_bruteforce, tree_shap
from startup_success.features import Dataset, feature_matrix, feature_rows
from startup_success.ingest import filter_companies, load_export
from startup_success.learners import (expected_random_metrics, logreg, mlp, random_baseline,
                                      softtree)
from startup_success.models import (FAMILIES, STRATEGIES, TrainedModel, UnsupportedCombination,
                                    split_rows, train_model, windows_study)
from startup_success.portfolio import score_companies, train_and_backtest
from startup_success.resample import (ImbalancePlan, Strategy, apply_imputation, impute_median,
                                      smote_with_sources)
from startup_success.synth import SynthConfig, generate
from startup_success.trees import preset, train_gbdt
from startup_success.trees.ensemble import sigmoid
from startup_success.windows import (build_samples, eligible_companies, label_distribution,
                                     samples_in, window_schedule)

pytestmark = pytest.mark.slow

BUILD_SECONDS = {}

# totals of the full 13-window label table on the reference export
REFERENCE_TOTALS = (398_489, 94_509, 23.72)


def _build(name, config):
    t = time.perf_counter()
    store = generate(config)
    samples = build_samples(store)
    ds = feature_matrix(store, samples)
    BUILD_SECONDS[name] = time.perf_counter() - t
    truth = np.array([store.ground_truth[(s.company_id, s.window.index)] for s in samples])
    return store, samples, ds, truth


@pytest.fixture(scope="session")
def mar():
    """Default generator: about a quarter positive, missing at random."""
    return _build("mar", SynthConfig(n_companies=50_000, seed=0))


@pytest.fixture(scope="session")
def mar_split(mar):
    ds = mar[2]
    tr, te = split_rows(len(ds), 0.9, seed=0)
    return ds.subset(tr), ds.subset(te), te


@pytest.fixture(scope="session")
def mar_models(mar_split):
    t = time.perf_counter()
    train = mar_split[0]
    out = {(fam, strat): train_model(fam, strat, train)
           for fam in ("gbdt-lgbm", "gbdt-xgb", "logreg") for strat in STRATEGIES}
    BUILD_SECONDS["mar_models"] = time.perf_counter() - t
    return out


def test_criterion_01_random_baseline():
    t = time.perf_counter()
    p, r, f1 = expected_random_metrics(0.2372)
    analytic = abs(p - 0.2372) <= 1e-4 and abs(r - 0.5) <= 1e-4 and abs(f1 - 0.3218) <= 1e-4
    y = (np.random.default_rng(0).random(100_000) < 0.2372).astype(int)
    emp = random_baseline(y, seed=1).empirical
    mc = (abs(emp.precision - 0.2372) <= 0.01 and abs(emp.recall - 0.5) <= 0.01
          and abs(emp.f1 - 0.3218) <= 0.01)
    ok = verdict(1, analytic and mc,
                 f"analytic p={p:.4f} r={r:.4f} f1={f1:.4f}; monte carlo p={emp.precision:.4f} "
                 f"r={emp.recall:.4f} f1={emp.f1:.4f}", time.perf_counter() - t, 5)
    assert ok


def test_criterion_02_smote_balance():
    t = time.perf_counter()
    rng = np.random.default_rng(7)
    n, k = 100_000, 5
    X = rng.normal(size=(n, 19)) * rng.uniform(0.1, 1000, 19)
    y = (rng.random(n) < 0.24).astype(int)
    out, seeds, nbrs = smote_with_sources(Dataset(X, y), ImbalancePlan(Strategy.SMOTE, k, 0))
    n_pos = int(out.y.sum())
    balanced = n_pos == len(out) - n_pos
    syn = out.X[n:]
    a, b = X[seeds], X[nbrs]
    tol = 1e-9 * np.abs(syn)
    between = np.all((np.minimum(a, b) <= syn + tol) & (syn - tol <= np.maximum(a, b)), axis=1)
    sources_ok = bool(np.all(y[seeds] == 1) and np.all(y[nbrs] == 1) and np.all(seeds != nbrs))
    # the claimed neighbour must be among the k nearest minority rows, by brute force
    mino = np.flatnonzero(y == 1)
    Z = (X[mino] - X.mean(0)) / X.std(0)
    pos = np.searchsorted(mino, seeds)
    nb_pos = np.searchsorted(mino, nbrs)
    sample = rng.choice(len(syn), 300, replace=False)
    knn_ok = 0
    for i in sample:
        d = ((Z - Z[pos[i]]) ** 2).sum(1)
        d[pos[i]] = np.inf
        knn_ok += d[nb_pos[i]] <= np.partition(d, k - 1)[k - 1] * (1 + 1e-12)
    ok = verdict(2, balanced and between.all() and sources_ok and knn_ok == len(sample),
                 f"classes {n_pos}/{len(out) - n_pos}; {between.mean():.2%} of {len(syn)} "
                 f"synthetic rows between their sources; {knn_ok}/{len(sample)} sampled "
                 f"neighbours confirmed by brute force", time.perf_counter() - t, 30)
    assert ok


def test_criterion_03_split_oracle():
    t = time.perf_counter()
    rng = np.random.default_rng(3)
    n_fix = 1200
    bad = sum(not compare_split(*split_fixture(rng), lam=float(rng.choice([0.0, 1.0, 5.0])),
                                mcw=float(rng.choice([0.0, 1.0])))
              for _ in range(n_fix))
    ok = verdict(3, bad == 0, f"{n_fix} fixtures, {bad} mismatches", time.perf_counter() - t, 60)
    assert ok


def test_criterion_04_shapley_oracle(mar_split, mar_models):
    t = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = 0.0
    n_ens = 120
    for i in range(n_ens):
        ens, X = random_ensemble(rng, "gbdt" if i % 2 == 0 else "forest",
                                 depth=int(rng.integers(1, 4)), n_trees=int(rng.integers(1, 5)))
        x = X[int(rng.integers(len(X)))]
        diff = np.abs(tree_shap(ens, x).phi - shapley_bruteforce(ens, x).phi).max()
        worst = max(worst, float(diff))
    model = mar_models["gbdt-lgbm", "none"]
    test = mar_split[1]
    rows = test.X[rng.choice(len(test), 100, replace=False)]
    resid = max(abs(tree_shap(model, x).residual) for x in rows)
    ok = verdict(4, worst < 1e-6 and resid < 1e-6,
                 f"{n_ens} ensembles max |fast - brute force| {worst:.1e}; local accuracy on "
                 f"100 rows of a {len(model.estimator.trees)}-tree model max residual {resid:.1e}",
                 time.perf_counter() - t, 60)
    assert ok


def test_criterion_05_gradient_checks():
    t = time.perf_counter()
    rng = np.random.default_rng(5)
    X = rng.normal(size=(60, 19))
    y = (rng.random(60) < sigmoid(X[:, 0] - X[:, 1])).astype(int)
    w = rng.uniform(0.5, 2, 60)
    depth = 3
    n_inner = 2 ** depth - 1
    results = {
        "logreg": gradient_check(lambda th: logreg.loss_and_grad(th, X, y, w, 0.1),
                                 rng.normal(size=20), rng),
        # the loss function takes no dropout masks, so dropout is off
        "mlp": gradient_check(lambda th: mlp.loss_and_grad(th, X, y, w, (8, 5), 1e-3),
                              mlp.flatten(mlp.init_params(19, (8, 5), rng)), rng),
        "softtree": gradient_check(
            lambda th: softtree.flat_objective(th, X[:, :4], y, w, depth, 1.0, 0.1),
            rng.normal(0, 0.5, size=n_inner * 5 + (n_inner + 1) * 2), rng),
    }
    ok = all(k >= 20 and err < 1e-4 for err, k in results.values())
    detail = "; ".join(f"{name} {k} params max rel err {err:.1e}"
                       for name, (err, k) in results.items())
    ok = verdict(5, ok, detail, time.perf_counter() - t, 60)
    assert ok


def test_criterion_06_imbalance_direction(mar_split, mar_models):
    t = time.perf_counter()
    test = mar_split[1]
    res = {key: metrics(m.predict_proba(test.X), test.y) for key, m in mar_models.items()}
    ok = True
    parts = []
    for fam in ("gbdt-lgbm", "gbdt-xgb", "logreg"):
        base = res[fam, "none"]
        ok &= all(res[fam, s].recall > base.recall for s in ("smote", "weight"))
        line = (f"{fam} recall none/smote/weight {base.recall:.3f}/"
                f"{res[fam, 'smote'].recall:.3f}/{res[fam, 'weight'].recall:.3f}")
        if fam.startswith("gbdt"):
            ok &= res[fam, "weight"].f1 > base.f1
            line += f" f1 {base.f1:.3f} -> {res[fam, 'weight'].f1:.3f}"
        parts.append(line)
    elapsed = time.perf_counter() - t + BUILD_SECONDS["mar"] + BUILD_SECONDS["mar_models"]
    ok = verdict(6, ok, f"base rate {test.y.mean():.3f}; " + "; ".join(parts), elapsed, 600)
    assert ok


def test_criterion_07_sparsity_payoff():
    t = time.perf_counter()
    ds = _build("informative", SynthConfig(n_companies=50_000, seed=0, base_intercept=0.0,
                                           informative_missingness=True))[2]
    tr, te = split_rows(len(ds), 0.9, seed=0)
    train, test = ds.subset(tr), ds.subset(te)
    p = preset("gbdt-lgbm")
    sparse = auc(train_gbdt(train, p).predict_proba(test.X), test.y)
    imputed, med = impute_median(train)
    dense = auc(train_gbdt(imputed, p).predict_proba(apply_imputation(test.X, med)), test.y)
    ok = verdict(7, sparse - dense >= 0.01,
                 f"test AUC sparsity-aware {sparse:.4f} vs median-imputed {dense:.4f} "
                 f"(gain {sparse - dense:+.4f})", time.perf_counter() - t, 600)
    assert ok


def test_criterion_08_ground_truth_ranking(mar, mar_split, mar_models):
    t = time.perf_counter()
    store, samples, _, truth = mar
    test, te = mar_split[1], mar_split[2]
    scores = mar_models["gbdt-lgbm", "none"].predict_proba(test.X)
    rho = spearmanr(scores, truth[te]).statistic
    res = train_and_backtest(store, "gbdt-lgbm", "weight", samples_in(samples, range(12)),
                             window_schedule()[12], 100, stages=())
    hits = int(sum(res.realized[c] for c in res.portfolio.company_ids))
    p = binomtest(hits, 100, res.base_rate, alternative="greater").pvalue
    ok = rho >= 0.6 and hits > 100 * res.base_rate and p < 0.01
    elapsed = time.perf_counter() - t + BUILD_SECONDS["mar"] + BUILD_SECONDS["mar_models"]
    ok = verdict(8, ok, f"spearman vs latent probability {rho:.3f}; top-100 successes {hits} "
                        f"vs {100 * res.base_rate:.1f} expected (one-sided p {p:.1e})",
                 elapsed, 600)
    assert ok


def test_criterion_09_windows_study(mar):
    t = time.perf_counter()
    ds = mar[2]
    rates = [ds.y[ds.window_index == k].mean() for k in range(13)]
    ok = max(rates) - min(rates) > 0.05
    parts = [f"window base rates {min(rates):.3f}-{max(rates):.3f}"]
    first_same = []
    for protocol in ("in-sample", "out-of-sample"):
        rows = windows_study(ds, protocol, strategy="weight")
        wins = sum(r["f1_multiple"] >= r["f1_single"] for r in rows)
        ok &= wins >= 0.7 * len(rows)
        first = rows[0]
        first_same.append(first["same_training_set"] and first["f1_single"] == first["f1_multiple"])
        parts.append(f"{protocol} multiple >= single in {wins}/{len(rows)}")
    ok &= all(first_same)
    parts.append("first window identical" if all(first_same) else "first window differs")
    elapsed = time.perf_counter() - t + BUILD_SECONDS["mar"]
    ok = verdict(9, ok, "; ".join(parts), elapsed, 900)
    assert ok


def _cli_run(root, tag, threads):
    d = root / tag
    p = lambda name: str(d / name)
    th = ["--threads", str(threads)]
    codes = [
        cli(["synth", "--out", p("data"), "--n-companies", "3000", "--seed", "11"] + th),
        cli(["windows", "--data", p("data"), "--out", p("samples.csv")] + th),
        cli(["features", "--data", p("data"), "--samples", p("samples.csv"),
             "--out", p("features.csv")] + th),
    ]
    for fam in ("gbdt-lgbm", "gbdt-xgb", "forest", "mlp"):
        codes.append(cli(["train", "--model", fam, "--strategy", "weight", "--features",
                          p("features.csv"), "--windows", "0-11", "--split", "all",
                          "--out", p(f"{fam}.json"), "--seed", "5"] + th))
    codes.append(cli(["portfolio", "--model", p("gbdt-lgbm.json"), "--asof", "2018-01-01",
                      "--k", "50", "--data", p("data"), "--out", p("port")] + th))
    files = ["data/organizations.csv", "data/funding_rounds.csv", "samples.csv",
             "features.csv", "gbdt-lgbm.json", "gbdt-xgb.json", "forest.json", "mlp.json",
             "port/portfolio.csv", "port/success_curve.csv"]
    return codes, {f: (d / f).read_bytes() for f in files}


def test_criterion_10_determinism_and_roundtrip(tmp_path, small_ds):
    t = time.perf_counter()
    runs = {(tag, th): _cli_run(tmp_path, f"{tag}{th}", th) for tag in ("a", "b") for th in (1, 4)}
    codes_ok = all(c == 0 for codes, _ in runs.values() for c in codes)
    ref = runs["a", 1][1]
    differing = sorted({f for _, files in runs.values() for f in files if files[f] != ref[f]})
    # round trip for every family and strategy the family supports
    ds = small_ds.subset(np.arange(0, len(small_ds), 4))
    small = {"forest": {"n_estimators": 10}, "gbdt-xgb": {"n_estimators": 10},
             "gbdt-lgbm": {"n_estimators": 10}, "mlp": {"epochs": 3}, "softtree": {"epochs": 3}}
    n_rt = 0
    bad_rt = []
    for fam in FAMILIES:
        for strat in STRATEGIES:
            try:
                m = train_model(fam, strat, ds, small.get(fam))
            except UnsupportedCombination:
                continue
            back = TrainedModel.from_json(m.to_json())
            n_rt += 1
            if not (np.array_equal(back.predict_proba(ds.X), m.predict_proba(ds.X))
                    and back.to_json() == m.to_json()):
                bad_rt.append(f"{fam}/{strat}")
    ok = codes_ok and not differing and not bad_rt
    detail = (f"{len(ref)} artifacts x 2 runs x threads {{1,4}}: {len(differing)} differ; "
              f"{n_rt} family/strategy round trips, {len(bad_rt)} not bit-identical")
    if differing or bad_rt:
        detail += f" ({', '.join(differing + bad_rt)})"
    ok = verdict(10, ok, detail, time.perf_counter() - t, 300)
    assert ok


def test_criterion_11_temporal_hygiene(small_store, small_samples):
    t = time.perf_counter()
    W = window_schedule()
    base = {}
    for k in range(13):
        ids = eligible_companies(small_store, W[k].t_s)
        model = None
        if k >= 1:
            model = train_model("gbdt-lgbm", "weight",
                                feature_matrix(small_store, samples_in(small_samples, range(k))),
                                {"n_estimators": 20})
        base[k] = (ids, feature_rows(small_store, ids, W[k].t_s),
                   [(s.company_id, s.window.index, s.label) for s in samples_in(small_samples,
                                                                                 range(k))],
                   model, score_companies(small_store, model, W[k].t_s, ids) if model else None)
    rng = np.random.default_rng(11)
    n_trials = 1000
    violations = {"eligibility": 0, "features": 0, "labels": 0, "scores": 0}
    for _ in range(n_trials):
        k = int(rng.integers(13))
        ids, X, labels, model, scores = base[k]
        s2 = perturb_after(small_store, W[k].t_s, rng, n_events=int(rng.integers(1, 6)))
        if eligible_companies(s2, W[k].t_s) != ids:
            violations["eligibility"] += 1
            continue
        violations["features"] += not np.array_equal(feature_rows(s2, ids, W[k].t_s), X,
                                                      equal_nan=True)
        got = [(s.company_id, s.window.index, s.label) for s in build_samples(s2, W[:k])]
        violations["labels"] += got != labels
        if model is not None:
            violations["scores"] += score_companies(s2, model, W[k].t_s, ids) != scores
    total = sum(violations.values())
    detail = ", ".join(f"{name} {v}" for name, v in violations.items())
    ok = verdict(11, total == 0, f"{n_trials} perturbation trials, violations: {detail}",
                 time.perf_counter() - t, 300)
    assert ok


def test_criterion_12_reference_export():
    export = os.environ.get("STARTUP_SUCCESS_EXPORT")
    if not export:
        line = ("criterion 12 SKIP  report-only; set STARTUP_SUCCESS_EXPORT to a daily "
                "export directory to compare label-table totals")
        ACCEPTANCE_LINES.append(line)
        print(line)
        pytest.skip("no reference export supplied")
    t = time.perf_counter()
    store = filter_companies(load_export(export))
    total = label_distribution(build_samples(store))[-1]
    got = (total["success"], total["fail"], total["success_pct"])
    line = (f"criterion 12 REPORT  totals success/fail/pct {got} vs reference "
            f"{REFERENCE_TOTALS}  [{time.perf_counter() - t:.1f}s]")
    ACCEPTANCE_LINES.append(line)
    print(line)
