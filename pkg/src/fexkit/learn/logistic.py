"""L2-regularised logistic regression by full-batch gradient descent."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import NonFinite
from .labels import encode_labels
from .model import TrainedModel

ARMIJO_C = 1e-4


def objective(w, b, X, y, l2):
    """Mean log-loss plus ``l2/2 * |w|^2``; ``y`` in {0, 1}; bias unpenalised."""
    z = X @ w + b
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(w, w))


def gradient(w, b, X, y, l2):
    r = expit(X @ w + b) - y
    return X.T @ r / X.shape[0] + l2 * w, float(np.mean(r))


def fit_binary(X, y, l2=1e-2, max_iter=1000, tol=1e-6):
    """Gradient descent with Armijo backtracking.

    Each iteration first tries twice the previous accepted step, then halves
    until the sufficient-decrease condition holds. Stops when the gradient's
    max-norm drops below ``tol``. Returns ``(w, b, losses)`` where ``losses``
    lists the objective after every accepted step (starting at w=0, b=0).
    """
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    # 1/L for the bias-augmented design bounds the first trial step
    step = 1.0 / (0.25 * (np.sum(X * X) + n) / n + l2)
    f = objective(w, b, X, y, l2)
    losses = [f]
    for _ in range(max_iter):
        gw, gb = gradient(w, b, X, y, l2)
        gmax = max(float(np.max(np.abs(gw))) if d else 0.0, abs(gb))
        if gmax < tol:
            break
        gsq = float(np.dot(gw, gw)) + gb * gb
        step *= 2.0
        while True:
            w_new, b_new = w - step * gw, b - step * gb
            f_new = objective(w_new, b_new, X, y, l2)
            if f_new <= f - ARMIJO_C * step * gsq:
                break
            step *= 0.5
            if step < 1e-300:
                return w, b, losses
        w, b, f = w_new, b_new, f_new
        losses.append(f)
    return w, b, losses


def train_logistic(X, y, l2=1e-2, max_iter=1000, tol=1e-6, labels=None) -> TrainedModel:
    """Binary logistic regression, or one-vs-rest when ``y`` has more than two labels.

    Binary models predict ``labels[1]`` as the positive class.
    """
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise NonFinite("training features contain non-finite values")
    labels, codes = encode_labels(y, labels)
    targets = [codes == 1] if len(labels) == 2 else [codes == k for k in range(len(labels))]
    W, B, iters = [], [], []
    for t in targets:
        w, b, losses = fit_binary(X, t.astype(np.float64), l2, max_iter, tol)
        W.append(w)
        B.append(b)
        iters.append(len(losses) - 1)
    params = {
        "n_features": X.shape[1],
        "weights": np.array(W),
        "bias": np.array(B),
        "l2": float(l2),
        "iterations": np.array(iters, dtype=np.int64),
    }
    return TrainedModel("logistic", labels, params)
