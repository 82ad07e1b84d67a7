"""
Missing values and class imbalance
==================================

Boosted trees learn where to send missing values. When missingness itself
carries signal, that beats filling holes with medians. Separately, SMOTE
and inverse-frequency weights trade precision for recall on the minority
(successful) class.
"""

from startup_success.evaluate import auc, metrics
from startup_success.features import feature_matrix
from startup_success.learners import expected_random_metrics
from startup_success.models import split_rows, train_model
from startup_success.resample import apply_imputation, impute_median
from startup_success.synth import SynthConfig, generate
from startup_success.trees import preset, train_gbdt
from startup_success.windows import build_samples


def dataset(**kw):
    store = generate(SynthConfig(n_companies=10_000, seed=2, **kw))
    ds = feature_matrix(store, build_samples(store))
    tr, te = split_rows(len(ds), 0.9, seed=0)
    return ds.subset(tr), ds.subset(te)


# informative missingness: absent records lower the planted success odds
train, test = dataset(informative_missingness=True, base_intercept=0.0)
params = preset("gbdt-lgbm")
sparse = train_gbdt(train, params)
filled, medians = impute_median(train)
dense = train_gbdt(filled, params)
print("AUC with learned default directions", round(auc(sparse.predict_proba(test.X), test.y), 4))
print("AUC after median imputation        ",
      round(auc(dense.predict_proba(apply_imputation(test.X, medians)), test.y), 4))

# imbalance strategies against a coin-flip baseline
train, test = dataset()
p, r, f1 = expected_random_metrics(test.y.mean())
print(f"{'random':10s} {'-':8s} p={p:.3f} r={r:.3f} f1={f1:.3f}")
for family in ("gbdt-lgbm", "logreg"):
    for strategy in ("none", "smote", "weight"):
        m = train_model(family, strategy, train)
        res = metrics(m.predict_proba(test.X), test.y)
        print(f"{family:10s} {strategy:8s} p={res.precision:.3f} r={res.recall:.3f} f1={res.f1:.3f}")
