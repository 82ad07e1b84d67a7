"""Two-hidden-layer ReLU network with dropout, trained with Adam."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..trees.ensemble import sigmoid


@dataclass(frozen=True)
class MLPParams:
    hidden: tuple[int, ...] = (64, 64)
    dropout: float = 0.1
    learning_rate: float = 1e-3
    batch_size: int = 256
    epochs: int = 20
    l2: float = 0.0
    seed: int = 0

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["hidden"] = tuple(d["hidden"])
        return cls(**d)


def _shapes(n_in, hidden):
    sizes = [n_in, *hidden, 1]
    return [((a, b), (b,)) for a, b in zip(sizes[:-1], sizes[1:])]


def init_params(n_in, hidden, rng) -> list[np.ndarray]:
    params = []
    for (wshape, bshape) in _shapes(n_in, hidden):
        params.append(rng.normal(0.0, np.sqrt(2.0 / wshape[0]), size=wshape))
        params.append(np.zeros(bshape))
    return params


def flatten(params) -> np.ndarray:
    return np.concatenate([p.ravel() for p in params])


def unflatten(theta, n_in, hidden) -> list[np.ndarray]:
    out, pos = [], 0
    for wshape, bshape in _shapes(n_in, hidden):
        for shape in (wshape, bshape):
            size = int(np.prod(shape))
            out.append(theta[pos:pos + size].reshape(shape))
            pos += size
    return out


def forward_backward(params, X, y, w, masks=None, l2=0.0):
    """Weighted mean cross-entropy and gradients for each parameter array.

    ``masks`` holds one already-scaled dropout mask per hidden layer, or
    None for no dropout.
    """
    n_layers = len(params) // 2
    acts = [X]
    pre = []
    h = X
    for li in range(n_layers):
        W, b = params[2 * li], params[2 * li + 1]
        z = h @ W + b
        pre.append(z)
        if li < n_layers - 1:
            h = np.maximum(z, 0.0)
            if masks is not None:
                h = h * masks[li]
            acts.append(h)
    logit = pre[-1][:, 0]
    wsum = np.sum(w)
    loss = np.sum(w * (np.logaddexp(0.0, logit) - y * logit)) / wsum
    loss += 0.5 * l2 * sum(np.sum(params[2 * i] ** 2) for i in range(n_layers))

    grads = [None] * len(params)
    delta = (w * (sigmoid(logit) - y) / wsum)[:, None]
    for li in range(n_layers - 1, -1, -1):
        W = params[2 * li]
        grads[2 * li] = acts[li].T @ delta + l2 * W
        grads[2 * li + 1] = delta.sum(axis=0)
        if li > 0:
            delta = delta @ W.T
            if masks is not None:
                delta = delta * masks[li - 1]
            delta = delta * (pre[li - 1] > 0)
    return loss, grads


def loss_and_grad(theta, X, y, w, hidden=(64, 64), l2=0.0):
    """Flat-vector interface (dropout off), used for gradient checks."""
    params = unflatten(theta, X.shape[1], hidden)
    loss, grads = forward_backward(params, X, y, w, None, l2)
    return loss, flatten(grads)


class MLPClassifier:
    def __init__(self, params: list[np.ndarray], config: MLPParams):
        self.params = params
        self.config = config
        self.history: list[float] = []

    def predict_proba(self, X) -> np.ndarray:
        h = np.asarray(X, dtype=float)
        n_layers = len(self.params) // 2
        for li in range(n_layers):
            h = h @ self.params[2 * li] + self.params[2 * li + 1]
            if li < n_layers - 1:
                h = np.maximum(h, 0.0)
        return sigmoid(h[:, 0])

    def to_dict(self):
        return {"config": self.config.to_dict(), "n_in": int(self.params[0].shape[0]),
                "theta": flatten(self.params).tolist()}

    @classmethod
    def from_dict(cls, d):
        cfg = MLPParams.from_dict(d["config"])
        return cls(unflatten(np.asarray(d["theta"], dtype=float), d["n_in"], cfg.hidden), cfg)


class DivergenceError(FloatingPointError):
    pass


def adam_steps(params, grads, state, lr, t, b1=0.9, b2=0.999, eps=1e-8):
    m, v = state
    for i, g in enumerate(grads):
        m[i] = b1 * m[i] + (1 - b1) * g
        v[i] = b2 * v[i] + (1 - b2) * g * g
        mhat = m[i] / (1 - b1 ** t)
        vhat = v[i] / (1 - b2 ** t)
        params[i] -= lr * mhat / (np.sqrt(vhat) + eps)


def train_mlp(X, y, w=None, params: MLPParams = MLPParams()) -> MLPClassifier:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones(len(y)) if w is None else np.asarray(w, dtype=float)
    rng = np.random.default_rng(params.seed)
    theta = init_params(X.shape[1], params.hidden, rng)
    model = MLPClassifier(theta, params)
    initial, _ = forward_backward(theta, X, y, w, None, params.l2)
    model.history.append(float(initial))
    state = ([np.zeros_like(p) for p in theta], [np.zeros_like(p) for p in theta])
    keep = 1.0 - params.dropout
    t = 0
    n = len(y)
    for _ in range(params.epochs):
        order = rng.permutation(n)
        for start in range(0, n, params.batch_size):
            idx = order[start:start + params.batch_size]
            masks = None
            if params.dropout > 0:
                masks = [(rng.random((idx.size, hdim)) < keep) / keep for hdim in params.hidden]
            _, grads = forward_backward(theta, X[idx], y[idx], w[idx], masks, params.l2)
            t += 1
            adam_steps(theta, grads, state, params.learning_rate, t)
        loss, _ = forward_backward(theta, X, y, w, None, params.l2)
        if not np.isfinite(loss) or loss > 10 * initial:
            raise DivergenceError(f"mlp diverged: loss {loss:.4g} vs initial {initial:.4g} "
                                  f"after {t} steps (lr={params.learning_rate})")
        model.history.append(float(loss))
    return model
