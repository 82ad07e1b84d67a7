"""L2-regularised logistic regression on dense scaled input."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..trees.ensemble import sigmoid


def loss_and_grad(theta, X, y, w, l2=0.0):
    """Weighted mean log-loss plus ``l2/2 * |coef|^2`` and its gradient.

    ``theta`` is ``[coef..., intercept]``.
    """
    coef, b = theta[:-1], theta[-1]
    z = X @ coef + b
    wsum = np.sum(w)
    loss = np.sum(w * (np.logaddexp(0.0, z) - y * z)) / wsum + 0.5 * l2 * coef @ coef
    r = w * (sigmoid(z) - y) / wsum
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ r + l2 * coef
    grad[-1] = np.sum(r)
    return loss, grad


@dataclass
class LogisticModel:
    coef: np.ndarray
    intercept: float
    grad_norm: float = float("nan")
    n_iter: int = 0

    def decision_function(self, X):
        return np.asarray(X, dtype=float) @ self.coef + self.intercept

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))

    def to_dict(self):
        return {"coef": self.coef.tolist(), "intercept": self.intercept,
                "grad_norm": self.grad_norm, "n_iter": self.n_iter}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["coef"], dtype=float), float(d["intercept"]),
                   float(d["grad_norm"]), int(d["n_iter"]))


def train_logreg(X, y, w=None, *, l2: float = 1e-4, max_iter: int = 500,
                 tol: float = 1e-8) -> LogisticModel:
    """Minimise the weighted logistic loss with L-BFGS."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones(len(y)) if w is None else np.asarray(w, dtype=float)
    theta0 = np.zeros(X.shape[1] + 1)

    def fun(theta):
        loss, grad = loss_and_grad(theta, X, y, w, l2)
        if not np.isfinite(loss):
            raise FloatingPointError(
                f"non-finite logistic loss; |theta|={np.linalg.norm(theta):.3g}, "
                f"max|X|={np.abs(X).max():.3g}")
        return loss, grad

    res = minimize(fun, theta0, jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "gtol": tol, "ftol": 1e-12})
    _, grad = loss_and_grad(res.x, X, y, w, l2)
    return LogisticModel(res.x[:-1].copy(), float(res.x[-1]), float(np.linalg.norm(grad)),
                         int(res.nit))
