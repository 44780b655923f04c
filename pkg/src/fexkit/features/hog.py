"""Histogram of oriented gradients on grayscale face crops."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import _kernels
from ..errors import BadDimensions, MaskShapeMismatch

BLOCK_EPS = 1e-12


@dataclass(frozen=True)
class HogConfig:
    orientations: int = 8
    cell: int = 8
    block: int = 2
    block_stride: int = 1
    signed_gradients: bool = False

    def __post_init__(self):
        if self.orientations < 1 or self.cell < 1 or self.block < 1 or self.block_stride < 1:
            raise ValueError("HOG parameters must be positive")

    def feature_length(self, height, width) -> int:
        ncy, ncx = height // self.cell, width // self.cell
        by = (ncy - self.block) // self.block_stride + 1
        bx = (ncx - self.block) // self.block_stride + 1
        if by < 1 or bx < 1:
            return 0
        return by * bx * self.block * self.block * self.orientations

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in ("orientations", "cell", "block", "block_stride", "signed_gradients") if k in d})


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    provenance: str  # "hog", "hog+pca" or "landmarks+hog"

    def __len__(self):
        return len(self.values)


def as_gray_image(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise BadDimensions(f"expected a non-empty 2-D grayscale image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise BadDimensions("image contains non-finite pixels")
    return img


def hog(img, mask=None, cfg: HogConfig | None = None) -> FeatureVector:
    """HOG descriptor of ``img`` (values in [0, 1], shape ``(H, W)``).

    Pixels where ``mask`` is 0 are zeroed before taking gradients. Gradients
    are centred differences with replicated borders; each pixel's magnitude
    is split linearly between the two nearest orientation bins (unsigned,
    0-180 degrees, unless ``cfg.signed_gradients``). Blocks of
    ``block x block`` cells are L2-normalised with ``v / (|v| + 1e-12)`` and
    concatenated in row-major block order, each block laid out as
    (cell row, cell column, orientation).
    """
    cfg = cfg or HogConfig()
    img = as_gray_image(img)
    h, w = img.shape
    if h % cfg.cell or w % cfg.cell:
        raise BadDimensions(f"image {h}x{w} is not divisible by cell size {cfg.cell}")
    if h // cfg.cell < cfg.block or w // cfg.cell < cfg.block:
        raise BadDimensions(f"image {h}x{w} is smaller than one block")
    if mask is not None:
        mask = np.asarray(mask)
        if mask.shape != img.shape:
            raise MaskShapeMismatch(f"mask {mask.shape} does not match image {img.shape}")
        img = np.where(mask != 0, img, 0.0)
    cells = _kernels.cell_histograms(img, cfg.orientations, cfg.cell, cfg.signed_gradients)
    return FeatureVector(normalize_blocks(cells, cfg), "hog")


def normalize_blocks(cells, cfg: HogConfig) -> np.ndarray:
    ncy, ncx, _ = cells.shape
    b, st = cfg.block, cfg.block_stride
    out = []
    for by in range(0, ncy - b + 1, st):
        for bx in range(0, ncx - b + 1, st):
            v = cells[by : by + b, bx : bx + b, :].ravel()
            out.append(v / (np.sqrt(np.dot(v, v)) + BLOCK_EPS))
    return np.concatenate(out)
