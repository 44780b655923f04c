"""Procedural fixtures: AU displacement fields, sketch-face images and Fex tables.

Everything here is regenerable from a seed:

* :data:`AU_DISPLACEMENTS` moves template landmarks (interocular distance
  100) for each of the 20 AUs; a face with activations ``a`` is
  ``template + sum_i a_i * AU_DISPLACEMENTS[i]``.
* :func:`render_sketch_image` draws the 68-point sketch strokes as
  anti-aliased dark lines (Gaussian falloff of the point-to-segment distance)
  on a light background.
* :func:`goodnews_table` builds the two-condition clip dataset used to
  exercise the replication analysis.
"""

from __future__ import annotations

import math

import numpy as np

from .fexdata import AU_NAMES, FexTable
from .geometry import SimilarityTransform, flatten_landmarks, neutral_template

# iBUG stroke topology: (name, [(indices, closed), ...])
FACE_STROKES = (
    ("jaw", [(tuple(range(0, 17)), False)]),
    ("brow_left", [(tuple(range(17, 22)), False)]),
    ("brow_right", [(tuple(range(22, 27)), False)]),
    ("nose", [(tuple(range(27, 31)), False), (tuple(range(31, 36)), False)]),
    ("eye_left", [(tuple(range(36, 42)), True)]),
    ("eye_right", [(tuple(range(42, 48)), True)]),
    ("lips_outer", [(tuple(range(48, 60)), True)]),
    ("lips_inner", [(tuple(range(60, 68)), True)]),
)


def _field(moves):
    d = np.zeros((68, 2))
    for idx, (dx, dy) in moves.items():
        d[idx] = (dx, dy)
    return d


# template units, y down: negative dy moves a point up
_AU_MOVES = {
    "AU01": {21: (0, -8), 22: (0, -8), 20: (0, -5), 23: (0, -5), 19: (0, -2), 24: (0, -2)},
    "AU02": {17: (0, -7), 18: (0, -7), 25: (0, -7), 26: (0, -7), 19: (0, -3), 24: (0, -3)},
    "AU04": {19: (0, 4), 20: (1, 5), 21: (3, 5), 22: (-3, 5), 23: (-1, 5), 24: (0, 4)},
    "AU05": {37: (0, -3), 38: (0, -3), 43: (0, -3), 44: (0, -3)},
    "AU06": {40: (0, -2), 41: (0, -2), 46: (0, -2), 47: (0, -2), 1: (0, -2), 2: (0, -2), 14: (0, -2), 15: (0, -2)},
    "AU07": {40: (0, -3), 41: (0, -3), 46: (0, -3), 47: (0, -3)},
    "AU09": {31: (0, -3), 32: (0, -3), 33: (0, -3), 34: (0, -3), 35: (0, -3), 21: (0, 2), 22: (0, 2)},
    "AU10": {49: (0, -4), 50: (0, -4), 51: (0, -4), 52: (0, -4), 53: (0, -4), 61: (0, -3), 62: (0, -3), 63: (0, -3)},
    "AU12": {48: (-6, -6), 54: (6, -6), 49: (-3, -3), 59: (-3, -3), 60: (-3, -3),
             53: (3, -3), 55: (3, -3), 64: (3, -3)},
    "AU14": {48: (-4, 0), 54: (4, 0), 60: (-2, 0), 64: (2, 0)},
    "AU15": {48: (-2, 6), 54: (2, 6), 60: (0, 3), 64: (0, 3), 59: (0, 2), 55: (0, 2)},
    "AU17": {56: (0, -4), 57: (0, -4), 58: (0, -4), 65: (0, -3), 66: (0, -3), 67: (0, -3),
             7: (0, -4), 8: (0, -4), 9: (0, -4)},
    "AU18": {48: (6, 0), 54: (-6, 0), 60: (4, 0), 64: (-4, 0)},
    "AU20": {48: (-7, 2), 54: (7, 2), 60: (-5, 1), 64: (5, 1)},
    "AU23": {61: (0, 2), 62: (0, 2), 63: (0, 2), 65: (0, -2), 66: (0, -2), 67: (0, -2)},
    "AU24": {50: (0, 2), 51: (0, 2), 52: (0, 2), 56: (0, -2), 57: (0, -2), 58: (0, -2)},
    "AU25": {65: (0, 4), 66: (0, 4), 67: (0, 4), 56: (0, 4), 57: (0, 4), 58: (0, 4), 61: (0, -1), 62: (0, -1), 63: (0, -1)},
    "AU26": {5: (0, 6), 6: (0, 8), 7: (0, 10), 8: (0, 10), 9: (0, 10), 10: (0, 8), 11: (0, 6),
             55: (0, 8), 56: (0, 10), 57: (0, 10), 58: (0, 10), 59: (0, 8), 65: (0, 10), 66: (0, 10), 67: (0, 10)},
    "AU28": {50: (0, 3), 51: (0, 3), 52: (0, 3), 56: (0, -3), 57: (0, -3), 58: (0, -3)},
    "AU43": {37: (0, 5), 38: (0, 5), 43: (0, 5), 44: (0, 5), 40: (0, -1), 41: (0, -1), 46: (0, -1), 47: (0, -1)},
}
AU_DISPLACEMENTS = np.stack([_field(_AU_MOVES[name]) for name in AU_NAMES])
AU_DISPLACEMENTS.setflags(write=False)


def au_face(aus, template=None) -> np.ndarray:
    """Template landmarks displaced by the AU activation vector (20 values)."""
    template = neutral_template() if template is None else np.asarray(template, dtype=np.float64)
    a = np.asarray(aus, dtype=np.float64)
    return template + np.tensordot(a, AU_DISPLACEMENTS, axes=1)


def random_aus(rng, p_active=0.3, low=0.2, high=1.0) -> np.ndarray:
    active = rng.random(len(AU_NAMES)) < p_active
    return np.where(active, rng.uniform(low, high, len(AU_NAMES)), 0.0)


def random_similarity(rng, scale=(0.8, 1.25), max_rotation_deg=15.0, shift=30.0) -> SimilarityTransform:
    return SimilarityTransform(
        float(rng.uniform(*scale)),
        math.radians(float(rng.uniform(-max_rotation_deg, max_rotation_deg))),
        (float(rng.uniform(-shift, shift)), float(rng.uniform(-shift, shift))),
    )


def viz_training_data(seed, n=2000, noise=0.5):
    """AU vectors and jittered landmark sets for fitting the AU-to-landmark model.

    Each sample's face is randomly rotated/scaled/shifted after noise, so it
    has to be re-aligned to the template before fitting.
    """
    rng = np.random.default_rng(seed)
    aus = np.array([random_aus(rng) for _ in range(n)])
    shapes = []
    for a in aus:
        lm = au_face(a) + rng.normal(0.0, noise, (68, 2))
        shapes.append(random_similarity(rng).apply(lm))
    return aus, np.array(shapes)


def sketch_segments(lm) -> np.ndarray:
    """All stroke segments as ``(m, 2, 2)`` endpoint pairs."""
    lm = np.asarray(lm, dtype=np.float64)
    segs = []
    for _, parts in FACE_STROKES:
        for idx, closed in parts:
            pts = list(idx) + ([idx[0]] if closed else [])
            for a, b in zip(pts[:-1], pts[1:]):
                segs.append((lm[a], lm[b]))
    return np.array(segs)


def render_sketch_image(lm, height, width, line_sigma=1.0, ink=0.8, background=0.9) -> np.ndarray:
    """Grayscale image in [0, 1] of the sketch strokes of ``lm`` (pixel coords)."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    darkness = np.zeros((height, width))
    for (ax, ay), (bx, by) in sketch_segments(lm):
        dx, dy = bx - ax, by - ay
        L2 = dx * dx + dy * dy
        if L2 == 0:
            t = np.zeros_like(xx)
        else:
            t = np.clip(((xx - ax) * dx + (yy - ay) * dy) / L2, 0.0, 1.0)
        d2 = (xx - ax - t * dx) ** 2 + (yy - ay - t * dy) ** 2
        np.maximum(darkness, np.exp(-d2 / (2.0 * line_sigma**2)), out=darkness)
    return background - (background - (1.0 - ink)) * darkness


def place_face(lm, height, width, iod_px, rotation_deg=0.0, offset=(0.0, 0.0)) -> np.ndarray:
    """Scale/rotate template-unit landmarks into an image, centred plus ``offset``."""
    s = iod_px / 100.0
    t = SimilarityTransform(s, math.radians(rotation_deg), (width / 2.0 + offset[0], height / 2.0 + offset[1]))
    return t.apply(lm)


def au_image_dataset(seed, n, target="AU12", size=128, noise=0.02):
    """Rendered faces with random AU activations; labels say whether ``target`` is on.

    Returns ``(images, landmarks, labels)`` with half the samples (alternating)
    showing the target AU at intensity 0.6-1.0.
    """
    rng = np.random.default_rng(seed)
    k = AU_NAMES.index(target)
    images, lms, labels = [], [], []
    for i in range(n):
        a = random_aus(rng, p_active=0.15)
        on = i % 2 == 0
        a[k] = rng.uniform(0.6, 1.0) if on else 0.0
        lm = place_face(
            au_face(a), size, size, iod_px=rng.uniform(0.38, 0.45) * size,
            rotation_deg=rng.uniform(-10, 10), offset=tuple(rng.uniform(-4, 4, 2)),
        )
        img = render_sketch_image(lm, size, size) + rng.normal(0.0, noise, (size, size))
        images.append(np.clip(img, 0.0, 1.0))
        lms.append(lm)
        labels.append(int(on))
    return images, lms, labels


def landmark_table(landmarks, sessions=None) -> FexTable:
    """Fex table with only the landmark columns filled (one row per set)."""
    names = [f"x_{i}" for i in range(68)] + [f"y_{i}" for i in range(68)]
    flat = np.array([flatten_landmarks(lm) for lm in landmarks]).reshape(len(landmarks), 136)
    return FexTable.from_columns(len(landmarks), {c: flat[:, j] for j, c in enumerate(names)}, sessions=sessions)


GOOD_NEWS_LEVELS = {"AU12": (0.75, 0.25), "AU17": (0.60, 0.30), "AU01": (0.25, 0.55)}


def goodnews_table(seed, n_per_class=10, frames=30, null=False, clip_sd=0.02, frame_sd=0.05, fps=30.0):
    """Clip-level AU probabilities for a good-news vs bad-news design.

    Returns ``(table, conditions)``. Sessions are clip ids ``clip00..``; the
    first ``n_per_class`` are ``"good"``. Good clips have raised AU12 and AU17,
    bad clips raised AU01 (levels in :data:`GOOD_NEWS_LEVELS`); every other AU
    sits at 0.2 in both. Clip means scatter with ``clip_sd`` and frames around
    them with ``frame_sd``, so the class gap exceeds 5 within-class standard
    deviations. ``null=True`` draws both conditions from the good-news levels.
    """
    rng = np.random.default_rng(seed)
    n_clips = 2 * n_per_class
    frames_all, times, sessions, rows = [], [], [], []
    conditions = {}
    for c in range(n_clips):
        clip = f"clip{c:02d}"
        good = c < n_per_class
        conditions[clip] = "good" if good else "bad"
        levels = np.full(len(AU_NAMES), 0.2)
        for name, (g, b) in GOOD_NEWS_LEVELS.items():
            levels[AU_NAMES.index(name)] = g if (good or null) else b
        clip_mean = levels + rng.normal(0.0, clip_sd, len(AU_NAMES))
        vals = np.clip(clip_mean + rng.normal(0.0, frame_sd, (frames, len(AU_NAMES))), 0.0, 1.0)
        for f in range(frames):
            frames_all.append(f)
            times.append(f / fps)
            sessions.append(clip)
            rows.append(vals[f])
    rows = np.array(rows)
    cols = {name: rows[:, j] for j, name in enumerate(AU_NAMES)}
    cols["time_s"] = np.array(times)
    table = FexTable.from_columns(len(rows), cols, frame=np.array(frames_all), sessions=sessions)
    return table, conditions
