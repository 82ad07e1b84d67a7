import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gradient_check
from startup_success.learners import (MLPParams, Scaler, SoftDecisionTree, SoftTreeParams,
                                      expected_random_metrics, random_baseline, random_search,
                                      train_knn, train_logreg, train_mlp, train_soft_tree)
from startup_success.learners import logreg, mlp, softtree
from startup_success.learners.tune import sample_space
from startup_success.trees.ensemble import sigmoid


def _dense(rng, n=400, m=6):
    X = rng.normal(size=(n, m))
    y = (rng.random(n) < sigmoid(X[:, 0] - 0.8 * X[:, 1] + 0.3)).astype(int)
    return X, y


def test_logreg_gradient(rng):
    X, y = _dense(rng, 50)
    w = rng.uniform(0.5, 2, 50)
    theta = rng.normal(size=X.shape[1] + 1)
    err, k = gradient_check(lambda t: logreg.loss_and_grad(t, X, y, w, 0.1), theta, rng)
    assert k >= 7 and err < 1e-4


def test_mlp_gradient(rng):
    X, y = _dense(rng, 40)
    w = rng.uniform(0.5, 2, 40)
    theta = mlp.flatten(mlp.init_params(6, (8, 5), rng))
    err, k = gradient_check(lambda t: mlp.loss_and_grad(t, X, y, w, (8, 5), 1e-3), theta, rng)
    assert k >= 20 and err < 1e-4


def test_softtree_gradient(rng):
    X, y = _dense(rng, 40, 4)
    w = rng.uniform(0.5, 2, 40)
    depth = 3
    n_inner = 2 ** depth - 1
    theta = rng.normal(0, 0.5, size=n_inner * 5 + (n_inner + 1) * 2)
    err, k = gradient_check(lambda t: softtree.flat_objective(t, X, y, w, depth, 1.0, 0.1),
                            theta, rng)
    assert k >= 20 and err < 1e-4


def test_leaf_probabilities_sum_to_one(rng):
    X = rng.normal(size=(30, 4)) * 5
    W, b = rng.normal(size=(15, 4)), rng.normal(size=15)
    P = softtree.leaf_probabilities(W, b, X, 4)
    assert P.shape == (30, 16)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, rtol=1e-12)


def test_softtree_trains_and_roundtrips(rng):
    X, y = _dense(rng, 1500)
    m = train_soft_tree(X, y, params=SoftTreeParams(depth=3, epochs=8, seed=1))
    assert m.history[-1] < m.history[0]
    p = m.predict_proba(X)
    assert np.all((p >= 0) & (p <= 1))
    assert np.mean((p >= 0.5) == y) > 0.65
    back = SoftDecisionTree.from_dict(m.to_dict())
    np.testing.assert_array_equal(back.predict_proba(X), p)
    hard = m.predict_proba(X, mode="max")
    assert np.all((hard >= 0) & (hard <= 1))


def test_logreg_fits(rng):
    X, y = _dense(rng, 3000)
    m = train_logreg(X, y, l2=0.0)
    assert m.coef[0] == pytest.approx(1.0, abs=0.2) and m.coef[1] == pytest.approx(-0.8, abs=0.2)
    assert m.grad_norm < 1e-5
    a = train_logreg(X, y)
    b = train_logreg(X, y, np.ones(len(y)))
    np.testing.assert_array_equal(a.coef, b.coef)


def test_mlp_trains_and_is_seeded(rng):
    X, y = _dense(rng, 1000)
    p = MLPParams(hidden=(16, 8), epochs=5, seed=2)
    a, b = train_mlp(X, y, params=p), train_mlp(X, y, params=p)
    np.testing.assert_array_equal(a.predict_proba(X), b.predict_proba(X))
    assert np.all(np.isfinite(a.predict_proba(X)))


def test_scaler_train_statistics_only(rng):
    X = rng.normal(size=(50, 3)) * [1, 10, 0]
    X[3, 1] = np.nan
    s = Scaler.fit(X)
    Z = s.transform(X)
    assert not np.isnan(Z).any()
    assert s.std[2] == 1.0
    test = rng.normal(size=(5, 3)) * 1000
    np.testing.assert_allclose(s.transform(test), (test - s.mean) / s.std)


def test_knn_scale_invariance(rng):
    X, y = _dense(rng, 200)
    Q = rng.normal(size=(20, X.shape[1]))
    s1 = Scaler.fit(X)
    X2, Q2 = X.copy(), Q.copy()
    X2[:, 2] *= 1000.0
    Q2[:, 2] *= 1000.0
    s2 = Scaler.fit(X2)
    a = train_knn(s1.transform(X), y, 7).neighbors(s1.transform(Q))
    b = train_knn(s2.transform(X2), y, 7).neighbors(s2.transform(Q2))
    np.testing.assert_array_equal(a, b)
    with pytest.raises(NotImplementedError):
        train_knn(X, y, 3, weights=np.full(len(y), 2.0))


def test_knn_brute_force(rng):
    X = rng.integers(0, 3, size=(40, 2)).astype(float)
    y = rng.integers(0, 2, 40)
    Q = rng.integers(0, 3, size=(10, 2)).astype(float)
    got = train_knn(X, y, 5).neighbors(Q)
    for q, row in zip(Q, got):
        d = ((X - q) ** 2).sum(1)
        assert list(row) == list(np.lexsort((np.arange(40), d))[:5])


def test_random_baseline_identity():
    p, r, f1 = expected_random_metrics(0.2372)
    assert (round(p, 4), r, round(f1, 4)) == (0.2372, 0.5, 0.3218)
    y = (np.random.default_rng(0).random(100_000) < 0.2372).astype(int)
    res = random_baseline(y, seed=1)
    assert abs(res.empirical.recall - 0.5) < 0.01


def test_random_search():
    space = {"x": ("float", -2, 2), "n": ("int", 1, 3), "c": ("choice", ["a", "b"]),
             "lr": ("logfloat", 1e-3, 1)}
    obj = lambda p: -(p["x"] - 0.5) ** 2 + (p["c"] == "b")
    a = random_search(obj, space, 30, seed=4)
    b = random_search(obj, space, 30, seed=4)
    assert a.best_params == b.best_params and len(a.trials) == 30
    assert a.best_score == max(t.score for t in a.trials)
    first = random_search(lambda p: 1.0, space, 5, seed=0)
    assert first.best_params == first.trials[0].params
    init = random_search(obj, space, 3, initial_trials=[{"x": 0.5, "n": 1, "c": "b", "lr": 0.1}])
    assert init.best_score == 1.0
    with pytest.raises(ValueError):
        random_search(obj, space, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_sampled_values_in_range(seed):
    space = {"i": ("int", 2, 9), "f": ("float", 0.1, 0.2), "l": ("logfloat", 1e-4, 1e-1)}
    p = sample_space(space, np.random.default_rng(seed))
    assert 2 <= p["i"] <= 9 and 0.1 <= p["f"] <= 0.2 and 1e-4 <= p["l"] <= 1e-1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_probabilities_bounded(seed):
    rng = np.random.default_rng(seed)
    X, y = _dense(rng, 60, 3)
    Q = rng.normal(size=(10, 3)) * 1e3
    for model in (train_logreg(X, y), train_knn(X, y, 3)):
        p = model.predict_proba(Q)
        assert np.all(np.isfinite(p)) and np.all((p >= 0) & (p <= 1))
