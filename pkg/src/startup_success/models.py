"""Uniform train / predict / save contract over every model family.

A :class:`TrainedModel` bundles the estimator with the preprocessing it was
trained behind (median imputation for SMOTE, z-scoring for dense learners),
the imbalance strategy, and the latest label horizon of its training data
so that backtests can refuse leaky configurations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from datetime import date

import numpy as np

from .features import Dataset
from .learners import (KNNClassifier, LogisticModel, MLPClassifier, MLPParams, Scaler,
                       SoftDecisionTree, SoftTreeParams, random_search, train_knn, train_logreg,
                       train_mlp, train_soft_tree)
from .resample import ImbalancePlan, Strategy, apply_imputation, apply_plan
from .trees import BoostParams, ForestParams, TreeEnsemble, preset, train_forest, train_gbdt

FORMAT = "startup-success/model"
VERSION = 1

FAMILIES = ("logreg", "knn", "cart", "forest", "gbdt-xgb", "gbdt-lgbm", "softtree", "mlp")
TREE_FAMILIES = ("cart", "forest", "gbdt-xgb", "gbdt-lgbm")
STRATEGIES = ("none", "smote", "weight")

DISPLAY_NAMES = {
    "logreg": "Logistic Regression", "knn": "K Nearest Neighbor", "cart": "Decision Tree",
    "forest": "Random Forests", "gbdt-xgb": "XGBoost", "gbdt-lgbm": "LightGBM",
    "softtree": "soft Decision Tree", "mlp": "Multilayer Perceptron",
}


class UnsupportedCombination(ValueError):
    pass


def default_params(family: str) -> dict:
    if family == "logreg":
        return {"l2": 1e-4, "max_iter": 500}
    if family == "knn":
        return {"k": 5}
    if family == "cart":
        return ForestParams(n_estimators=1, max_depth=None, bootstrap=False,
                            max_features=None).to_dict()
    if family == "forest":
        return ForestParams().to_dict()
    if family in ("gbdt-xgb", "gbdt-lgbm"):
        return preset(family).to_dict()
    if family == "softtree":
        return SoftTreeParams().to_dict()
    if family == "mlp":
        return MLPParams().to_dict()
    raise ValueError(f"unknown model family {family!r}; choose from {', '.join(FAMILIES)}")


def resolve_params(family: str, overrides: dict | None = None, seed: int | None = None) -> dict:
    params = default_params(family)
    unknown = set(overrides or {}) - set(params)
    if unknown:
        raise ValueError(f"unknown parameters for {family}: {', '.join(sorted(unknown))}")
    params.update(overrides or {})
    if seed is not None and "seed" in params:
        params["seed"] = seed
    return params


@dataclass
class TrainedModel:
    family: str
    strategy: str
    estimator: object
    params: dict
    feature_names: tuple[str, ...]
    imputation: np.ndarray | None = None
    scaler: Scaler | None = None
    trained_through: date | None = None
    training_windows: tuple[int, ...] = ()

    @property
    def name(self):
        return DISPLAY_NAMES.get(self.family, self.family)

    def prepare(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ValueError(f"expected {len(self.feature_names)} features, got shape {X.shape}")
        if self.imputation is not None:
            X = apply_imputation(X, self.imputation)
        if self.scaler is not None:
            X = self.scaler.transform(X)
        return X

    def predict_proba(self, X) -> np.ndarray:
        return np.asarray(self.estimator.predict_proba(self.prepare(X)), dtype=float)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT, "version": VERSION, "family": self.family,
            "strategy": self.strategy, "params": self.params,
            "feature_names": list(self.feature_names),
            "imputation": None if self.imputation is None else self.imputation.tolist(),
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
            "trained_through": None if self.trained_through is None
            else self.trained_through.isoformat(),
            "training_windows": list(self.training_windows),
            "estimator": self.estimator.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def from_dict(cls, d) -> "TrainedModel":
        if d.get("format") != FORMAT:
            raise ValueError(f"not a model file (format={d.get('format')!r})")
        if d.get("version") != VERSION:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        family = d["family"]
        est = d["estimator"]
        if family in TREE_FAMILIES:
            estimator = TreeEnsemble.from_dict(est)
        elif family == "logreg":
            estimator = LogisticModel.from_dict(est)
        elif family == "knn":
            estimator = KNNClassifier.from_dict(est)
        elif family == "softtree":
            estimator = SoftDecisionTree.from_dict(est)
        elif family == "mlp":
            estimator = MLPClassifier.from_dict(est)
        else:
            raise ValueError(f"unknown model family {family!r}")
        tt = d.get("trained_through")
        return cls(family, d["strategy"], estimator, d["params"], tuple(d["feature_names"]),
                   None if d["imputation"] is None else np.asarray(d["imputation"], dtype=float),
                   None if d["scaler"] is None else Scaler.from_dict(d["scaler"]),
                   None if tt is None else date.fromisoformat(tt),
                   tuple(d.get("training_windows", ())))

    @classmethod
    def from_json(cls, text) -> "TrainedModel":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "TrainedModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def _horizon(ds: Dataset):
    return max(ds.t_f) if ds.t_f else None


def train_model(family: str, strategy: str, ds: Dataset, params: dict | None = None,
                seed: int = 0, n_threads: int = 1, k_neighbors: int = 5) -> TrainedModel:
    """Train ``family`` under imbalance ``strategy`` on the raw (sparse) dataset."""
    if family not in FAMILIES:
        raise ValueError(f"unknown model family {family!r}; choose from {', '.join(FAMILIES)}")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")
    if family == "knn" and strategy == "weight":
        raise UnsupportedCombination("weight adjustment is not supported for k nearest neighbours")
    if len(ds) == 0:
        raise ValueError("empty training set")
    params = resolve_params(family, params, seed)
    plan = ImbalancePlan(Strategy(strategy), k_neighbors=k_neighbors, seed=seed)
    train, imputation = apply_plan(ds, plan)
    windows = () if ds.window_index is None else tuple(sorted(set(ds.window_index.tolist())))
    scaler = None

    if family in TREE_FAMILIES:
        if family.startswith("gbdt"):
            bp = replace(BoostParams.from_dict(params), n_threads=n_threads)
            estimator = train_gbdt(train, bp)
        else:
            fp = replace(ForestParams.from_dict(params), n_threads=n_threads)
            estimator = train_forest(train, fp)
    else:
        scaler = Scaler.fit(train.X)
        Z = scaler.transform(train.X)
        if family == "logreg":
            estimator = train_logreg(Z, train.y, train.w, l2=params["l2"],
                                     max_iter=params["max_iter"])
        elif family == "knn":
            estimator = train_knn(Z, train.y, k=min(params["k"], len(train)))
        elif family == "softtree":
            estimator = train_soft_tree(Z, train.y, train.w, SoftTreeParams.from_dict(params))
        else:
            estimator = train_mlp(Z, train.y, train.w, MLPParams.from_dict(params))
    return TrainedModel(family, strategy, estimator, params, tuple(ds.feature_names), imputation,
                        scaler, _horizon(ds), windows)


# Search spaces for the random-search tuner, per family.
SEARCH_SPACES = {
    "logreg": {"l2": ("logfloat", 1e-6, 1e-1)},
    "knn": {"k": ("int", 1, 50)},
    "cart": {"max_depth": ("int", 3, 30), "min_samples_leaf": ("int", 1, 50)},
    "forest": {"n_estimators": ("int", 20, 200), "max_depth": ("int", 4, 64),
               "min_samples_leaf": ("int", 1, 20)},
    "gbdt-xgb": {"n_estimators": ("int", 20, 300), "max_depth": ("int", 3, 12),
                 "learning_rate": ("logfloat", 0.02, 0.3), "lambda_l2": ("logfloat", 0.1, 10.0)},
    "gbdt-lgbm": {"n_estimators": ("int", 20, 400), "max_depth": ("int", 3, 12),
                  "max_leaves": ("int", 8, 63), "learning_rate": ("logfloat", 0.02, 0.3),
                  "lambda_l2": ("logfloat", 0.1, 10.0)},
    "softtree": {"depth": ("int", 3, 8), "learning_rate": ("logfloat", 1e-3, 5e-2)},
    "mlp": {"learning_rate": ("logfloat", 1e-4, 1e-2), "dropout": ("float", 0.0, 0.3)},
}


def tune_model(family: str, strategy: str, train: Dataset, valid: Dataset, budget: int,
               seed: int = 0, space: dict | None = None, initial_trials=(), th: float = 0.5,
               n_threads: int = 1):
    """Random search for the parameters maximising validation F1."""
    from .evaluate import metrics

    space = SEARCH_SPACES[family] if space is None else space

    def objective(p):
        m = train_model(family, strategy, train, p, seed=seed, n_threads=n_threads)
        return metrics(m.predict_proba(valid.X), valid.y, th).f1

    return random_search(objective, space, budget, seed, initial_trials)


def split_rows(n: int, ratio: float = 0.9, seed: int = 0):
    """Row indices of the seeded train/test split used for sample lists."""
    from .windows import split_train_test

    sp = split_train_test(list(range(n)), ratio, seed)
    return np.asarray(sp.train, dtype=np.int64), np.asarray(sp.test, dtype=np.int64)


def study_sets(ds: Dataset, window_index: int, protocol: str, seed: int = 0, ratio: float = 0.9):
    """Row indices (single, multiple, test) for one window of the single-vs-multiple study.

    Mirrors :func:`startup_success.windows.cumulative_training_sets`.
    """
    widx = ds.window_index
    current = np.flatnonzero(widx == window_index)
    earlier = np.flatnonzero(widx < window_index)
    if protocol == "out-of-sample":
        if window_index < 1:
            raise ValueError("out-of-sample protocol needs window_index >= 1")
        single = np.flatnonzero(widx == window_index - 1)
        return single, earlier, current
    if protocol == "in-sample":
        tr, te = split_rows(len(current), ratio, seed) if len(current) else ([], [])
        train, test = current[tr], current[te]
        multiple = train if window_index == 0 else np.concatenate([earlier, train])
        return train, multiple, test
    raise ValueError(f"unknown protocol {protocol!r}")


def windows_study(ds: Dataset, protocol: str, family: str = "gbdt-lgbm", strategy: str = "none",
                  params: dict | None = None, seed: int = 0, ratio: float = 0.9,
                  th: float = 0.5, n_threads: int = 1, windows=None) -> list[dict]:
    """F1 per window for single-window vs pooled-history training."""
    from .evaluate import metrics

    if windows is None:
        present = sorted(set(ds.window_index.tolist()))
        windows = [w for w in present if protocol == "in-sample" or w >= 1]
    rows = []
    for k in windows:
        single, multiple, test = study_sets(ds, k, protocol, seed, ratio)
        if len(test) == 0 or len(single) == 0:
            continue
        te = ds.subset(test)
        m_single = train_model(family, strategy, ds.subset(single), params, seed, n_threads)
        f1_single = metrics(m_single.predict_proba(te.X), te.y, th).f1
        same = np.array_equal(single, multiple)
        if same:
            f1_multiple = f1_single
        else:
            m_multi = train_model(family, strategy, ds.subset(multiple), params, seed, n_threads)
            f1_multiple = metrics(m_multi.predict_proba(te.X), te.y, th).f1
        rows.append({"window_index": int(k), "t_s": te.t_s[0].isoformat() if te.t_s else "",
                     "n_single": len(single), "n_multiple": len(multiple), "n_test": len(test),
                     "f1_single": f1_single, "f1_multiple": f1_multiple,
                     "same_training_set": bool(same)})
    return rows
