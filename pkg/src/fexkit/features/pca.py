from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, NonFinite, RankZero, TooFewSamples

# absorbs round-off in the cumulative ratio so retain=1.0 stops at full rank
_RETAIN_SLACK = 1e-12


@dataclass(frozen=True)
class PcaModel:
    """Mean, ``k`` orthonormal component rows and their explained-variance ratios."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray

    @property
    def k(self):
        return self.components.shape[0]

    @property
    def n_features(self):
        return self.components.shape[1]

    def to_dict(self):
        return {
            "mean": self.mean,
            "components": self.components,
            "explained_variance_ratio": self.explained_variance_ratio,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["mean"], dtype=np.float64),
            np.asarray(d["components"], dtype=np.float64).reshape(-1, len(d["mean"])),
            np.asarray(d["explained_variance_ratio"], dtype=np.float64),
        )


def fit_pca(X, retain=0.95) -> PcaModel:
    """Fit PCA by SVD of the centred data, keeping the fewest components whose
    cumulative explained variance reaches ``retain``.

    Component signs are fixed so the largest-magnitude loading is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise TooFewSamples("PCA needs at least 2 rows")
    if not np.all(np.isfinite(X)):
        raise NonFinite("PCA input contains non-finite values")
    if not 0.0 < retain <= 1.0:
        raise ValueError("retain must be in (0, 1]")
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    var = s * s
    total = var.sum()
    if total <= 0.0:
        raise RankZero("all rows are identical")
    ratio = var / total
    cum = np.cumsum(ratio)
    k = int(np.searchsorted(cum, retain - _RETAIN_SLACK) + 1)
    k = min(k, int(np.count_nonzero(s > s[0] * max(X.shape) * np.finfo(float).eps)) or 1)
    comps = vt[:k].copy()
    flip = np.sign(comps[np.arange(k), np.argmax(np.abs(comps), axis=1)])
    comps *= flip[:, None]
    return PcaModel(mean, comps, ratio[:k].copy())


def pca_transform(model: PcaModel, X) -> np.ndarray:
    """Project rows onto the components: ``(X - mean) @ components.T``."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(f"expected {model.n_features} columns, got {X.shape[1]}")
    Z = (X - model.mean) @ model.components.T
    return Z[0] if single else Z


def pca_inverse_transform(model: PcaModel, Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape[-1] != model.k:
        raise DimensionMismatch(f"expected {model.k} score columns, got {Z.shape[-1]}")
    return Z @ model.components + model.mean
