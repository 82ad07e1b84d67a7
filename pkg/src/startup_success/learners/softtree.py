"""Soft decision tree: sigmoid gates at inner nodes, class logits at leaves.

Nodes are stored heap-style: inner node ``n`` has children ``2n+1`` (left)
and ``2n+2`` (right); the gate value is the probability of going right.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .mlp import DivergenceError, adam_steps


@dataclass(frozen=True)
class SoftTreeParams:
    depth: int = 8
    beta: float = 1.0
    penalty: float = 0.1
    learning_rate: float = 1e-2
    batch_size: int = 256
    epochs: int = 20
    inference: str = "average"
    seed: int = 0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def path_probabilities(W, b, X, depth, beta=1.0):
    """(gates, node probabilities) for a batch; node probabilities cover all nodes."""
    n_inner = 2 ** depth - 1
    s = _sigmoid(beta * (X @ W.T + b))
    P = np.empty((X.shape[0], 2 * n_inner + 1))
    P[:, 0] = 1.0
    for level in range(depth):
        nodes = np.arange(2 ** level - 1, 2 ** (level + 1) - 1)
        P[:, 2 * nodes + 1] = P[:, nodes] * (1.0 - s[:, nodes])
        P[:, 2 * nodes + 2] = P[:, nodes] * s[:, nodes]
    return s, P


def leaf_probabilities(W, b, X, depth, beta=1.0):
    _, P = path_probabilities(W, b, X, depth, beta)
    return P[:, 2 ** depth - 1:]


def node_depths(depth):
    return np.concatenate([np.full(2 ** d, d) for d in range(depth)])


def objective(W, b, phi, X, y, w, depth, beta=1.0, penalty=0.1):
    """Path-weighted cross-entropy plus the balance penalty, with gradients.

    Returns ``(loss, dW, db, dphi)``.
    """
    n_inner = 2 ** depth - 1
    y = y.astype(np.int64)
    wn = w / np.sum(w)
    s, P = path_probabilities(W, b, X, depth, beta)
    logQ = _log_softmax(phi)
    Q = np.exp(logQ)
    P_leaf = P[:, n_inner:]
    cost = -logQ[:, y].T  # (batch, leaves)
    loss = np.sum(wn[:, None] * P_leaf * cost)

    P_inner = P[:, :n_inner]
    D = P_inner.sum(axis=0)
    alpha = np.clip((P_inner * s).sum(axis=0) / np.maximum(D, 1e-300), 1e-12, 1 - 1e-12)
    lam = penalty * 2.0 ** (-node_depths(depth))
    loss += -np.sum(lam * 0.5 * (np.log(alpha) + np.log(1.0 - alpha)))
    dC_dalpha = -0.5 * lam * (1.0 / alpha - 1.0 / (1.0 - alpha))
    Dsafe = np.maximum(D, 1e-300)

    G = np.zeros_like(P)
    G[:, n_inner:] = wn[:, None] * cost
    for level in range(depth - 1, -1, -1):
        nodes = np.arange(2 ** level - 1, 2 ** (level + 1) - 1)
        sn = s[:, nodes]
        G[:, nodes] = ((1.0 - sn) * G[:, 2 * nodes + 1] + sn * G[:, 2 * nodes + 2]
                       + dC_dalpha[nodes] * (sn - alpha[nodes]) / Dsafe[nodes])
    dS = (P_inner * (G[:, 2 * np.arange(n_inner) + 2] - G[:, 2 * np.arange(n_inner) + 1])
          + dC_dalpha * P_inner / Dsafe)
    dZ = dS * beta * s * (1.0 - s)
    dW = dZ.T @ X
    db = dZ.sum(axis=0)

    onehot = np.zeros((len(y), 2))
    onehot[np.arange(len(y)), y] = 1.0
    # d/dphi_lk of sum_x wn P_l (-log Q_l[y]) = sum_x wn P_l (Q_lk - [k == y])
    A = wn[:, None] * P_leaf
    dphi = A.sum(axis=0)[:, None] * Q - A.T @ onehot
    return loss, dW, db, dphi


class SoftDecisionTree:
    def __init__(self, W, b, phi, params: SoftTreeParams):
        self.W = W
        self.b = b
        self.phi = phi
        self.params = params
        self.history: list[float] = []

    @property
    def depth(self):
        return self.params.depth

    def leaf_probabilities(self, X):
        return leaf_probabilities(self.W, self.b, np.asarray(X, dtype=float), self.depth,
                                  self.params.beta)

    def predict_proba(self, X, mode: str | None = None, chunk: int = 4096) -> np.ndarray:
        mode = mode or self.params.inference
        X = np.asarray(X, dtype=float)
        q1 = _softmax(self.phi)[:, 1]
        out = np.empty(X.shape[0])
        for start in range(0, X.shape[0], chunk):
            Pl = self.leaf_probabilities(X[start:start + chunk])
            if mode == "average":
                out[start:start + chunk] = Pl @ q1
            elif mode == "max":
                out[start:start + chunk] = q1[np.argmax(Pl, axis=1)]
            else:
                raise ValueError(f"unknown inference mode {mode!r}")
        return out

    def to_dict(self):
        return {"params": self.params.to_dict(), "W": self.W.tolist(), "b": self.b.tolist(),
                "phi": self.phi.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["W"], dtype=float), np.asarray(d["b"], dtype=float),
                   np.asarray(d["phi"], dtype=float), SoftTreeParams.from_dict(d["params"]))


def flat_objective(theta, X, y, w, depth, beta=1.0, penalty=0.1):
    """Objective and gradient over one flat parameter vector (for checks)."""
    m = X.shape[1]
    n_inner = 2 ** depth - 1
    W = theta[:n_inner * m].reshape(n_inner, m)
    b = theta[n_inner * m:n_inner * (m + 1)]
    phi = theta[n_inner * (m + 1):].reshape(n_inner + 1, 2)
    loss, dW, db, dphi = objective(W, b, phi, X, y, w, depth, beta, penalty)
    return loss, np.concatenate([dW.ravel(), db, dphi.ravel()])


def train_soft_tree(X, y, w=None, params: SoftTreeParams = SoftTreeParams()) -> SoftDecisionTree:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    w = np.ones(len(y)) if w is None else np.asarray(w, dtype=float)
    rng = np.random.default_rng(params.seed)
    n_inner = 2 ** params.depth - 1
    W = rng.normal(0.0, 0.1, size=(n_inner, X.shape[1]))
    b = np.zeros(n_inner)
    phi = np.zeros((n_inner + 1, 2))
    model = SoftDecisionTree(W, b, phi, params)
    args = (params.depth, params.beta, params.penalty)

    def full_loss():
        total = 0.0
        for start in range(0, len(y), 8192):
            sl = slice(start, start + 8192)
            total += objective(W, b, phi, X[sl], y[sl], w[sl], *args)[0] * w[sl].sum()
        return total / w.sum()

    initial = full_loss()
    model.history.append(initial)
    theta = [W, b, phi]
    state = ([np.zeros_like(p) for p in theta], [np.zeros_like(p) for p in theta])
    t = 0
    for _ in range(params.epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), params.batch_size):
            idx = order[start:start + params.batch_size]
            _, dW, db, dphi = objective(W, b, phi, X[idx], y[idx], w[idx], *args)
            t += 1
            adam_steps(theta, [dW, db, dphi], state, params.learning_rate, t)
        loss = full_loss()
        if not np.isfinite(loss) or loss > 10 * initial:
            raise DivergenceError(f"soft tree diverged: loss {loss:.4g} vs initial {initial:.4g}")
        model.history.append(loss)
    return model
