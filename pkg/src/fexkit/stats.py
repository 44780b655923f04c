"""Two-sample t-tests, OLS regression and intersubject correlation.

The Student-t tail uses a self-contained regularised incomplete beta
(Lentz continued fraction), so p-values carry no dependency on a statistics
library.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, RankDeficientDesign, TooFewSamples, ZeroVariance

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAX_ITER = 10_000


class ConstantSeriesWarning(UserWarning):
    """A subject's series is constant, so its correlations are undefined (NaN)."""


def _betacf(a, b, x):
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _CF_TINY if abs(d) < _CF_TINY else d
        c = 1.0 + aa / c
        c = _CF_TINY if abs(c) < _CF_TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _CF_TINY if abs(d) < _CF_TINY else d
        c = 1.0 + aa / c
        c = _CF_TINY if abs(c) < _CF_TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a, b, x) -> float:
    """Regularised incomplete beta function ``I_x(a, b)`` for ``a, b > 0``."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t, df) -> float:
    """``P(|T| >= |t|)`` for Student's t with ``df`` degrees of freedom."""
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    return min(1.0, max(0.0, betainc(0.5 * df, 0.5, df / (df + t * t))))


def t_cdf(t, df) -> float:
    half = 0.5 * t_two_sided_p(t, df)
    return 1.0 - half if t > 0 else half


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float
    dropped: int = 0  # NaN samples removed before testing


def ttest_ind(a, b, equal_var=True) -> TTestResult:
    """Independent two-sample t-test of ``mean(a) - mean(b)``.

    Pooled-variance Student test by default (``df = n_a + n_b - 2``);
    ``equal_var=False`` gives Welch's test. NaNs are dropped from each sample.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    dropped = int(np.isnan(a).sum() + np.isnan(b).sum())
    a, b = a[~np.isnan(a)], b[~np.isnan(b)]
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise TooFewSamples(f"each group needs at least 2 finite values, got {na} and {nb}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("samples must be finite")
    ma, mb = float(a.mean()), float(b.mean())
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    if equal_var:
        df = float(na + nb - 2)
        sp2 = ((na - 1) * va + (nb - 1) * vb) / df
        se2 = sp2 * (1.0 / na + 1.0 / nb)
    else:
        qa, qb = va / na, vb / nb
        se2 = qa + qb
        df = se2 * se2 / (qa * qa / (na - 1) + qb * qb / (nb - 1)) if se2 > 0 else float(na + nb - 2)
    diff = ma - mb
    if se2 == 0.0:
        if diff == 0.0:
            raise ZeroVariance("both groups are constant and equal")
        return TTestResult(math.copysign(math.inf, diff), df, 0.0, dropped)
    t = diff / math.sqrt(se2)
    return TTestResult(t, df, t_two_sided_p(t, df), dropped)


@dataclass(frozen=True)
class RegressionResult:
    """OLS fit of every ``Y`` column on the design; arrays are (k, m) or (n, m)."""

    beta: np.ndarray
    se: np.ndarray
    t: np.ndarray
    p: np.ndarray
    residuals: np.ndarray
    df: int
    degenerate: np.ndarray  # (m,) True where residual variance vanished


def regress(X, Y) -> RegressionResult:
    """Ordinary least squares via QR.

    Standard errors come from ``sigma^2 (X'X)^-1`` with ``sigma^2 = RSS/(n-k)``
    and p-values from Student's t with ``n - k`` degrees of freedom. When a
    column fits exactly, its t statistics are reported as ``+/-inf`` (0 for a
    zero coefficient) with p = 0 (1) and ``degenerate`` is set.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    n, k = X.shape
    if Y.shape[0] != n:
        raise DimensionMismatch("design and outcome row counts differ")
    if n <= k:
        raise TooFewSamples(f"need more rows than regressors ({n} <= {k})")
    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-10 * max(diag.max(), 1e-300):
        raise RankDeficientDesign("design matrix is not of full column rank")
    beta = np.linalg.solve(R, Q.T @ Y)
    resid = Y - X @ beta
    df = n - k
    rss = np.sum(resid * resid, axis=0)
    sigma2 = rss / df
    r_inv = np.linalg.solve(R, np.eye(k))
    xtx_inv_diag = np.sum(r_inv * r_inv, axis=1)
    se = np.sqrt(np.outer(xtx_inv_diag, sigma2))
    scale = np.maximum(1.0, np.max(np.abs(Y), axis=0))
    degenerate = rss <= n * (1e-13 * scale) ** 2
    t = np.empty_like(beta)
    p = np.empty_like(beta)
    for j in range(beta.shape[1]):
        for i in range(k):
            if degenerate[j]:
                t[i, j] = math.copysign(math.inf, beta[i, j]) if beta[i, j] != 0 else 0.0
                p[i, j] = 0.0 if beta[i, j] != 0 else 1.0
            else:
                t[i, j] = beta[i, j] / se[i, j]
                p[i, j] = t_two_sided_p(t[i, j], df)
    return RegressionResult(beta, se, t, p, resid, df, degenerate)


def _pearson(u, v):
    du, dv = u - u.mean(), v - v.mean()
    den = math.sqrt(float(np.dot(du, du)) * float(np.dot(dv, dv)))
    if den == 0.0:
        return math.nan
    return max(-1.0, min(1.0, float(np.dot(du, dv)) / den))


def isc(subjects: Sequence, axis="time") -> np.ndarray:
    """Subject-by-subject Pearson correlation matrix.

    Each subject is a ``(time, features)`` matrix. ``axis="time"`` correlates
    the feature-averaged time courses; ``axis="features"`` correlates the
    time-averaged feature profiles. NaNs are ignored in the averages. A
    constant summary yields NaN entries (including its diagonal) and a
    :class:`ConstantSeriesWarning`.
    """
    mats = [np.asarray(s, dtype=np.float64) for s in subjects]
    if len(mats) < 2:
        raise TooFewSamples("isc needs at least two subjects")
    mats = [m[:, None] if m.ndim == 1 else m for m in mats]
    if any(m.shape != mats[0].shape for m in mats):
        raise DimensionMismatch("all subjects must have the same shape")
    if axis == "time":
        summaries = [_nanmean(m, axis=1) for m in mats]
    elif axis == "features":
        summaries = [_nanmean(m, axis=0) for m in mats]
    else:
        raise ValueError("axis must be 'time' or 'features'")
    s = len(summaries)
    out = np.empty((s, s))
    constant = []
    for i in range(s):
        for j in range(i, s):
            r = 1.0 if i == j else _pearson(summaries[i], summaries[j])
            if i == j and np.ptp(summaries[i]) == 0:
                r = math.nan
                constant.append(i)
            out[i, j] = out[j, i] = r
    if constant:
        warnings.warn(f"constant series for subjects {constant}; correlations set to NaN", ConstantSeriesWarning)
    return out


def _nanmean(m, axis):
    count = np.sum(~np.isnan(m), axis=axis)
    total = np.nansum(m, axis=axis)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, total / np.maximum(count, 1), np.nan)
