"""Landmark geometry: similarity alignment, convex hulls, face masks, box overlap.

Landmark sets are ``(68, 2)`` float arrays of ``(x, y)`` pixel coordinates in
the iBUG 68-point order, with ``y`` growing downward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from . import _kernels
from .errors import DegenerateFace, DegenerateHull, InvalidTable

LEFT_OUTER_EYE = 36
RIGHT_OUTER_EYE = 45
# brow point ranges and the upper-eyelid points each side is measured against
BROW_EYELID_PAIRS = ((range(17, 22), (37, 38)), (range(22, 27), (43, 44)))
BROW_SHIFT = 1.5


def as_landmarks(points) -> np.ndarray:
    lm = np.asarray(points, dtype=np.float64)
    if lm.shape == (136,):
        lm = np.column_stack([lm[:68], lm[68:]])
    if lm.shape != (68, 2):
        raise InvalidTable(f"landmark set must have shape (68, 2), got {lm.shape}")
    if not np.all(np.isfinite(lm)):
        raise InvalidTable("landmark coordinates must be finite")
    return lm


def flatten_landmarks(lm) -> np.ndarray:
    """``(68, 2)`` -> ``x_0..x_67, y_0..y_67``."""
    lm = np.asarray(lm, dtype=np.float64)
    return np.concatenate([lm[:, 0], lm[:, 1]])


@lru_cache(maxsize=1)
def _template_cached():
    text = resources.files("fexkit").joinpath("data/neutral_template.csv").read_text(encoding="utf-8")
    pts = np.array([[float(v) for v in line.split(",")] for line in text.splitlines() if line.strip()])
    pts.setflags(write=False)
    return pts


def neutral_template() -> np.ndarray:
    """The shipped neutral face: centred at the origin, interocular distance 100."""
    return _template_cached().copy()


@dataclass(frozen=True)
class FaceBox:
    x: float
    y: float
    width: float
    height: float
    score: float = 1.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise InvalidTable(f"face box must have positive size, got {self.width}x{self.height}")


@dataclass(frozen=True)
class SimilarityTransform:
    """``p -> scale * R(rotation) @ p + translation``.

    ``residual`` is the sum of squared fitting errors when produced by
    :func:`fit_similarity`, otherwise 0.
    """

    scale: float
    rotation: float
    translation: tuple[float, float]
    residual: float = 0.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @property
    def linear(self):
        """``(a, b)`` with ``a = s cos(r)``, ``b = s sin(r)``."""
        return self.scale * math.cos(self.rotation), self.scale * math.sin(self.rotation)

    def matrix(self) -> np.ndarray:
        a, b = self.linear
        tx, ty = self.translation
        return np.array([[a, -b, tx], [b, a, ty], [0.0, 0.0, 1.0]])

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        a, b = self.linear
        tx, ty = self.translation
        x, y = p[..., 0], p[..., 1]
        return np.stack([a * x - b * y + tx, b * x + a * y + ty], axis=-1)

    def inverse(self) -> "SimilarityTransform":
        s = 1.0 / self.scale
        r = -self.rotation
        c, sn = s * math.cos(r), s * math.sin(r)
        tx, ty = self.translation
        return SimilarityTransform(s, r, (-(c * tx - sn * ty), -(sn * tx + c * ty)))


def interocular_distance(lm) -> float:
    """Distance between the outer eye corners (points 36 and 45)."""
    lm = np.asarray(lm, dtype=np.float64)
    d = float(math.hypot(*(lm[RIGHT_OUTER_EYE] - lm[LEFT_OUTER_EYE])))
    if d == 0.0:
        raise DegenerateFace("outer eye corners coincide")
    return d


def fit_similarity(src, dst) -> SimilarityTransform:
    """Least-squares similarity (no reflection) mapping ``src`` onto ``dst``.

    Closed form: with both sets centred, ``a = sum(s.d) / |s|^2`` and
    ``b = sum(s x d) / |s|^2`` give ``scale*cos`` and ``scale*sin``.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValueError("src and dst must be matching (n, 2) arrays")
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
        raise DegenerateFace("non-finite landmark coordinates")
    ms, md = src.mean(axis=0), dst.mean(axis=0)
    s, d = src - ms, dst - md
    denom = float(np.sum(s * s))
    if denom == 0.0:
        raise DegenerateFace("source points have zero spread")
    a = float(np.sum(s[:, 0] * d[:, 0] + s[:, 1] * d[:, 1])) / denom
    b = float(np.sum(s[:, 0] * d[:, 1] - s[:, 1] * d[:, 0])) / denom
    scale = math.hypot(a, b)
    if scale == 0.0:
        raise DegenerateFace("destination points have zero spread")
    tx = md[0] - (a * ms[0] - b * ms[1])
    ty = md[1] - (b * ms[0] + a * ms[1])
    t = SimilarityTransform(scale, math.atan2(b, a), (float(tx), float(ty)))
    resid = float(np.sum((t.apply(src) - dst) ** 2))
    return SimilarityTransform(t.scale, t.rotation, t.translation, resid)


def align_to_template(lm, template=None) -> np.ndarray:
    """Map ``lm`` onto ``template`` (default: the neutral template) by similarity."""
    lm = as_landmarks(lm)
    template = neutral_template() if template is None else as_landmarks(template)
    return fit_similarity(lm, template).apply(lm)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> np.ndarray:
    """Counter-clockwise hull vertices (positive shoelace area), no collinear vertices.

    Monotone chain; starts from the lowest ``(x, y)`` point.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise DegenerateHull("need at least 3 points")
    uniq = sorted(set(map(tuple, pts.tolist())))
    if len(uniq) < 3:
        raise DegenerateHull("fewer than 3 distinct points")

    lower = []
    for p in uniq:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(uniq):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateHull("all points are collinear")
    return np.array(hull)


def polygon_area(poly) -> float:
    """Signed shoelace area; positive for counter-clockwise vertex order."""
    p = np.asarray(poly, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def shifted_brows(lm, factor=BROW_SHIFT) -> np.ndarray:
    """Brow points 17-26 moved up by ``factor`` times each side's mean brow-to-eyelid height."""
    lm = np.asarray(lm, dtype=np.float64)
    out = []
    for brows, lids in BROW_EYELID_PAIRS:
        b = lm[list(brows)]
        lid_y = lm[list(lids), 1].mean()
        d = float(np.mean(lid_y - b[:, 1]))
        out.append(b - np.array([0.0, factor * d]))
    return np.vstack(out)


def face_hull(lm, brow_shift=BROW_SHIFT) -> np.ndarray:
    """Hull of all 68 landmarks plus the upward-shifted brows (forehead included)."""
    lm = as_landmarks(lm)
    pts = lm if brow_shift == 0 else np.vstack([lm, shifted_brows(lm, brow_shift)])
    return convex_hull(pts)


def rasterize_polygon(poly, height, width) -> np.ndarray:
    """Mask of pixels whose centre ``(col, row)`` lies inside or on a convex CCW polygon."""
    return _kernels.rasterize_convex(poly, height, width)


def face_mask(lm, width, height, brow_shift=BROW_SHIFT) -> np.ndarray:
    """``(height, width)`` uint8 mask, 1 inside the forehead-extended face hull."""
    return rasterize_polygon(face_hull(lm, brow_shift), height, width)


def iou(a: FaceBox, b: FaceBox) -> float:
    """Intersection over union of two boxes (Jaccard similarity)."""
    ix = max(0.0, min(a.x + a.width, b.x + b.width) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.height, b.y + b.height) - max(a.y, b.y))
    inter = ix * iy
    union = a.width * a.height + b.width * b.height - inter
    return inter / union if union > 0 else 0.0
