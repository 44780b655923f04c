from .hog import FeatureVector, HogConfig, hog
from .pca import PcaModel, fit_pca, pca_inverse_transform, pca_transform
from .temporal import (
    bag_of_temporal_filters,
    baseline_normalize,
    lower_median,
    summarize_sessions,
    wavelet_band_features,
)

__all__ = [
    "FeatureVector",
    "HogConfig",
    "PcaModel",
    "bag_of_temporal_filters",
    "baseline_normalize",
    "fit_pca",
    "hog",
    "lower_median",
    "pca_inverse_transform",
    "pca_transform",
    "summarize_sessions",
    "wavelet_band_features",
]
