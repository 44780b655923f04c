"""Linear SVM trained with the Pegasos stochastic sub-gradient method."""

from __future__ import annotations

import numpy as np

from ..errors import NonFinite
from .labels import encode_labels
from .model import TrainedModel
from .rng import SplitMix64


def objective(w, X, y, l2, b=0.0):
    """``l2/2 * |w|^2 + mean(max(0, 1 - y (X w + b)))`` with ``y`` in {-1, +1}."""
    return float(0.5 * l2 * np.dot(w, w) + np.mean(np.maximum(0.0, 1.0 - y * (X @ w + b))))


def fit_binary(X, y, l2, epochs, rng: SplitMix64, fit_intercept=True):
    """Pegasos with projection and suffix averaging over the last half of the steps.

    The intercept is an extra constant-1 feature and is regularised with the
    weights. Each epoch visits the samples in a fresh ``rng.shuffle`` order.
    """
    n = X.shape[0]
    Xa = np.hstack([X, np.ones((n, 1))]) if fit_intercept else X
    w = np.zeros(Xa.shape[1])
    avg = np.zeros_like(w)
    total = epochs * n
    start_avg = total // 2
    radius = 1.0 / np.sqrt(l2)
    t = 0
    for _ in range(epochs):
        order = rng.shuffle(list(range(n)))
        for i in order:
            t += 1
            eta = 1.0 / (l2 * t)
            margin = y[i] * np.dot(w, Xa[i])
            w *= 1.0 - eta * l2
            if margin < 1.0:
                w += (eta * y[i]) * Xa[i]
            norm = np.sqrt(np.dot(w, w))
            if norm > radius:
                w *= radius / norm
            if t > start_avg:
                avg += w
    avg /= total - start_avg
    if fit_intercept:
        return avg[:-1], float(avg[-1])
    return avg, 0.0


def train_svm(X, y, l2=1e-2, epochs=20, seed=0, labels=None, fit_intercept=True) -> TrainedModel:
    """Linear SVM; one-vs-rest for more than two labels. Deterministic given ``seed``."""
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise NonFinite("training features contain non-finite values")
    if not l2 > 0:
        raise ValueError("svm requires l2 > 0")
    labels, codes = encode_labels(y, labels)
    targets = [codes == 1] if len(labels) == 2 else [codes == k for k in range(len(labels))]
    W, B = [], []
    for k, t in enumerate(targets):
        rng = SplitMix64(seed + k)
        w, b = fit_binary(X, np.where(t, 1.0, -1.0), l2, epochs, rng, fit_intercept)
        W.append(w)
        B.append(b)
    params = {"n_features": X.shape[1], "weights": np.array(W), "bias": np.array(B), "l2": float(l2)}
    return TrainedModel("svm", labels, params)
