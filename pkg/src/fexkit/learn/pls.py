"""PLS2 regression (NIPALS) with mean-centring."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, RankDeficient, TooFewSamples
from .model import TrainedModel

NIPALS_TOL = 1e-12
NIPALS_MAX_ITER = 1000


def _nipals_component(X, Y):
    """One latent component of deflated ``X``/``Y``: weights w, scores t, Y-loadings c."""
    u = Y[:, int(np.argmax(np.var(Y, axis=0)))]
    t_old = None
    for _ in range(NIPALS_MAX_ITER):
        w = X.T @ u
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise RankDeficient("X'u vanished; no covariance left to explain")
        w /= nw
        t = X @ w
        tt = float(t @ t)
        if tt == 0.0:
            raise RankDeficient("zero-norm score vector")
        c = Y.T @ t / tt
        if Y.shape[1] == 1:
            break
        cc = float(c @ c)
        if cc == 0.0:
            break
        u = Y @ c / cc
        if t_old is not None and np.linalg.norm(t - t_old) <= NIPALS_TOL * np.linalg.norm(t):
            break
        t_old = t
    return w, t, c


def fit_pls(X, Y, k, output_names=None) -> TrainedModel:
    """Fit ``k`` NIPALS components, deflating both X and Y.

    Predictions are ``X @ coef + intercept`` with ``coef = W (P'W)^-1 C'``
    and ``intercept = y_mean - x_mean @ coef``.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape
    if Y.shape[0] != n:
        raise DimensionMismatch("X and Y must have the same number of rows")
    if n < 2:
        raise TooFewSamples("PLS needs at least 2 rows")
    if not 1 <= k <= min(n - 1, d):
        raise ValueError(f"k must be in [1, {min(n - 1, d)}], got {k}")
    x_mean, y_mean = X.mean(axis=0), Y.mean(axis=0)
    Xr, Yr = X - x_mean, Y - y_mean
    scale = max(np.linalg.norm(Xr), 1e-300)
    W, P, C = [], [], []
    for _ in range(k):
        w, t, c = _nipals_component(Xr, Yr)
        tt = float(t @ t)
        if np.sqrt(tt) <= 1e-10 * scale:
            raise RankDeficient("deflated X has no remaining variance")
        p = Xr.T @ t / tt
        Xr = Xr - np.outer(t, p)
        Yr = Yr - np.outer(t, c)
        W.append(w)
        P.append(p)
        C.append(c)
    W, P, C = np.array(W).T, np.array(P).T, np.array(C).T
    coef = W @ np.linalg.solve(P.T @ W, C.T)
    intercept = y_mean - x_mean @ coef
    params = {
        "n_features": d,
        "k": k,
        "x_mean": x_mean,
        "y_mean": y_mean,
        "x_weights": W,
        "x_loadings": P,
        "y_loadings": C,
        "coef": coef,
        "intercept": intercept,
    }
    names = list(output_names) if output_names is not None else [f"y_{j}" for j in range(Y.shape[1])]
    return TrainedModel("pls", names, params)


def pls_predict(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    coef = model.params["coef"]
    if X.shape[1] != coef.shape[0]:
        raise DimensionMismatch(f"expected {coef.shape[0]} inputs, got {X.shape[1]}")
    out = X @ coef + model.params["intercept"]
    return out[0] if single else out
