"""SVG output: face sketches, AU-driven faces, detection overlays, bar charts.

All coordinates are written with 4 decimals and no timestamps, so identical
inputs give byte-identical documents.
"""

from __future__ import annotations

import base64
import io
import math
from dataclasses import dataclass
from typing import Mapping
from xml.sax.saxutils import escape

import numpy as np

from .errors import DimensionMismatch, EmptyRow
from .fexdata import AU_NAMES, EMOTION_NAMES, FexRow
from .geometry import align_to_template, as_landmarks, flatten_landmarks, neutral_template
from .learn.model import TrainedModel
from .learn.pls import fit_pls, pls_predict
from .synth import FACE_STROKES

HEAT_RAMP = ("#2c7bb6", "#abd9e9", "#ffffbf", "#fdae61", "#d7191c")
POSITIVE_COLOR = "#d7191c"
NEGATIVE_COLOR = "#2c7bb6"
LANDMARK_NAMES = [f"x_{i}" for i in range(68)] + [f"y_{i}" for i in range(68)]
VIZ_COMPONENTS = 20


def fmt(v) -> str:
    s = f"{float(v):.4f}"
    return "0.0000" if s == "-0.0000" else s


def _header(width, height):
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{fmt(width)}" height="{fmt(height)}" '
        f'viewBox="0 0 {fmt(width)} {fmt(height)}">',
    ]


def _close(lines):
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def ramp_color(u) -> str:
    """Linear interpolation along the 5-stop blue-to-red ramp, ``u`` in [0, 1]."""
    u = min(1.0, max(0.0, float(u))) * (len(HEAT_RAMP) - 1)
    i = min(int(math.floor(u)), len(HEAT_RAMP) - 2)
    f = u - i
    a = [int(HEAT_RAMP[i][k : k + 2], 16) for k in (1, 3, 5)]
    b = [int(HEAT_RAMP[i + 1][k : k + 2], 16) for k in (1, 3, 5)]
    return "#" + "".join(f"{round(x + (y - x) * f):02x}" for x, y in zip(a, b))


@dataclass(frozen=True)
class FaceSketch:
    """Landmarks plus the fixed stroke topology (8 stroke groups)."""

    landmarks: np.ndarray
    strokes: tuple = FACE_STROKES


class _Fit:
    """Uniform scale + offset mapping points into a square canvas with margin."""

    def __init__(self, points, size, margin=0.1):
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = max(float(np.max(hi - lo)), 1e-9)
        self.scale = size * (1.0 - 2.0 * margin) / span
        self.offset = size / 2.0 - self.scale * (lo + hi) / 2.0

    def __call__(self, p):
        return np.asarray(p, dtype=np.float64) * self.scale + self.offset


def _stroke_path(pts, parts):
    d = []
    for idx, closed in parts:
        d.append("M " + " L ".join(f"{fmt(pts[i, 0])} {fmt(pts[i, 1])}" for i in idx) + (" Z" if closed else ""))
    return " ".join(d)


def render_face(sketch, size=400, vectors_from=None, heat=None) -> str:
    """Draw a face sketch as SVG.

    ``vectors_from`` (e.g. the neutral face) adds one arrow per landmark from
    that position to the current one; zero-length arrows are omitted.
    ``heat`` gives one value per landmark, drawn as dots coloured along
    :data:`HEAT_RAMP` over ``[0, max(heat)]``.
    """
    lm = as_landmarks(sketch.landmarks if isinstance(sketch, FaceSketch) else sketch)
    strokes = sketch.strokes if isinstance(sketch, FaceSketch) else FACE_STROKES
    pts_all = lm if vectors_from is None else np.vstack([lm, as_landmarks(vectors_from)])
    fit = _Fit(pts_all, size)
    p = fit(lm)
    out = _header(size, size)
    arrows = []
    if vectors_from is not None:
        q = fit(as_landmarks(vectors_from))
        disp = lm - as_landmarks(vectors_from)
        for i in range(68):
            if math.hypot(*disp[i]) > 1e-9:
                arrows.append((q[i], p[i]))
    if arrows:
        out.append(
            '<defs><marker id="arrow" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto">'
            '<path d="M 0 0 L 6 3 L 0 6 Z" fill="#444444"/></marker></defs>'
        )
    out.append('<g fill="none" stroke="#222222" stroke-width="2" stroke-linejoin="round" stroke-linecap="round">')
    for name, parts in strokes:
        out.append(f'<path class="{name}" d="{_stroke_path(p, parts)}"/>')
    out.append("</g>")
    if heat is not None:
        h = np.asarray(heat, dtype=np.float64)
        if h.shape != (68,):
            raise DimensionMismatch("heat needs one value per landmark")
        top = float(np.nanmax(h)) if np.any(np.isfinite(h)) else 0.0
        out.append('<g class="heat" stroke="none">')
        for i in range(68):
            u = h[i] / top if top > 0 and np.isfinite(h[i]) else 0.0
            out.append(f'<circle cx="{fmt(p[i, 0])}" cy="{fmt(p[i, 1])}" r="4.0000" fill="{ramp_color(u)}"/>')
        out.append("</g>")
    if arrows:
        out.append('<g class="vectors" stroke="#444444" stroke-width="1">')
        for a, b in arrows:
            out.append(
                f'<line class="vector" x1="{fmt(a[0])}" y1="{fmt(a[1])}" x2="{fmt(b[0])}" y2="{fmt(b[1])}" '
                'marker-end="url(#arrow)"/>'
            )
        out.append("</g>")
    return _close(out)


# --- AU -> landmark visualisation model ------------------------------------


def au_vector(aus) -> np.ndarray:
    """20 activations in AU_NAMES order from a sequence or a name->value mapping."""
    if isinstance(aus, Mapping):
        unknown = set(aus) - set(AU_NAMES)
        if unknown:
            raise DimensionMismatch(f"unknown action units: {sorted(unknown)}")
        return np.array([float(aus.get(name, 0.0)) for name in AU_NAMES])
    a = np.asarray(aus, dtype=np.float64)
    if a.shape != (len(AU_NAMES),):
        raise DimensionMismatch(f"expected {len(AU_NAMES)} AU values, got shape {a.shape}")
    return a


def fit_visualization_model(aus, landmarks, k=VIZ_COMPONENTS) -> TrainedModel:
    """PLS map from 20 AU activations to 136 template-aligned landmark coordinates."""
    aus = np.asarray(aus, dtype=np.float64)
    if aus.shape[1:] != (len(AU_NAMES),):
        raise DimensionMismatch("visualization model inputs must be 20 AU activations")
    template = neutral_template()
    Y = np.array([flatten_landmarks(align_to_template(lm, template)) for lm in landmarks])
    model = fit_pls(aus, Y, k, output_names=LANDMARK_NAMES)
    model.meta["inputs"] = list(AU_NAMES)
    return model


def au_to_landmarks(model: TrainedModel, aus) -> np.ndarray:
    """Predicted template-aligned ``(68, 2)`` landmarks for an AU activation vector."""
    coef = model.params.get("coef")
    if model.kind != "pls" or coef is None or coef.shape != (len(AU_NAMES), 136):
        raise DimensionMismatch("visualization model must be a PLS map from 20 AUs to 136 coordinates")
    y = pls_predict(model, au_vector(aus))
    return np.column_stack([y[:68], y[68:]])


def neutral_face(model: TrainedModel) -> np.ndarray:
    b = model.params["intercept"]
    return np.column_stack([b[:68], b[68:]])


# --- bar charts and detection overlays -------------------------------------


def _bar_chart(out, x0, y0, width, height, names, values, title, colors=None, signed=False):
    """Append a bar chart; NaN values draw no bar. Bars are ``<rect class="bar">``."""
    n = len(names)
    slot = width / n
    bar_w = slot * 0.7
    out.append(f'<g class="chart">')
    out.append(f'<text x="{fmt(x0)}" y="{fmt(y0 - 8)}" font-family="sans-serif" font-size="12">{escape(title)}</text>')
    base = y0 + height / 2.0 if signed else y0 + height
    out.append(f'<line x1="{fmt(x0)}" y1="{fmt(base)}" x2="{fmt(x0 + width)}" y2="{fmt(base)}" stroke="#000000"/>')
    top = float(np.nanmax(np.abs(values))) if signed and np.any(np.isfinite(values)) else 1.0
    top = top if top > 0 else 1.0
    for i, (name, v) in enumerate(zip(names, values)):
        x = x0 + i * slot + (slot - bar_w) / 2.0
        label_y = y0 + height + 12
        out.append(
            f'<text x="{fmt(x + bar_w / 2)}" y="{fmt(label_y)}" font-family="sans-serif" font-size="8" '
            f'text-anchor="middle">{escape(name)}</text>'
        )
        if not np.isfinite(v):
            continue
        color = colors[i] if colors else "#4d4d4d"
        if signed:
            h = abs(v) / top * (height / 2.0)
            y = base - h if v >= 0 else base
        else:
            h = min(1.0, max(0.0, float(v))) * height
            y = base - h
        out.append(
            f'<rect class="bar" x="{fmt(x)}" y="{fmt(y)}" width="{fmt(bar_w)}" height="{fmt(h)}" fill="{color}"/>'
        )
    out.append("</g>")


def png_data_uri(image) -> str:
    from PIL import Image

    arr = np.clip(np.round(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG", optimize=False)
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


PANEL = 300.0
CHART_HEIGHT = 200.0


def plot_detections(row: FexRow, image=None) -> str:
    """Composite SVG: face panel (optional image, face box, landmark dots),
    then an AU bar chart and an emotion bar chart, side by side. Panels for
    missing groups are left out; bar height is value x 200 px."""
    if row.is_empty() and image is None:
        raise EmptyRow("row has no facebox, landmarks, AUs or emotions")
    panels = []
    if image is not None or row.facebox is not None or row.landmarks is not None:
        panels.append("face")
    if row.aus is not None:
        panels.append("aus")
    if row.emotions is not None:
        panels.append("emotions")
    width = PANEL * len(panels)
    out = _header(width, PANEL)
    x0 = 0.0
    for panel in panels:
        if panel == "face":
            out.extend(_face_panel(row, image, x0))
        elif panel == "aus":
            _bar_chart(out, x0 + 20, 50, PANEL - 40, CHART_HEIGHT, AU_NAMES, row.aus, "Action units")
        else:
            _bar_chart(out, x0 + 20, 50, PANEL - 40, CHART_HEIGHT, EMOTION_NAMES, row.emotions, "Emotions")
        x0 += PANEL
    return _close(out)


def _face_panel(row, image, x0):
    out = ['<g class="face">']
    if image is not None:
        img = np.asarray(image, dtype=np.float64)
        h, w = img.shape
        scale = PANEL / max(h, w)
        offset = np.array([x0, 0.0])
        out.append(
            f'<image x="{fmt(x0)}" y="0.0000" width="{fmt(w * scale)}" height="{fmt(h * scale)}" '
            f'href="{png_data_uri(img)}"/>'
        )
    else:
        pts = []
        if row.facebox is not None:
            b = row.facebox
            pts += [(b.x, b.y), (b.x + b.width, b.y + b.height)]
        if row.landmarks is not None:
            pts += row.landmarks.tolist()
        fit = _Fit(pts, PANEL)
        scale = fit.scale
        offset = fit.offset + np.array([x0, 0.0])
    if row.facebox is not None:
        b = row.facebox
        out.append(
            f'<rect class="facebox" x="{fmt(b.x * scale + offset[0])}" y="{fmt(b.y * scale + offset[1])}" '
            f'width="{fmt(b.width * scale)}" height="{fmt(b.height * scale)}" fill="none" stroke="#00a000" '
            'stroke-width="2"/>'
        )
    if row.landmarks is not None:
        p = row.landmarks * scale + offset
        for x, y in p:
            out.append(f'<circle class="landmark" cx="{fmt(x)}" cy="{fmt(y)}" r="1.5000" fill="#0050ff"/>')
    out.append("</g>")
    return out


@dataclass(frozen=True)
class CoefficientFaces:
    positive_landmarks: np.ndarray
    negative_landmarks: np.ndarray
    positive_svg: str
    negative_svg: str
    chart_svg: str


def classifier_coefficients(classifier: TrainedModel) -> np.ndarray:
    if classifier.kind not in ("logistic", "svm"):
        raise DimensionMismatch("coefficient faces need a linear classifier")
    w = np.asarray(classifier.params["weights"])
    if w.shape != (1, len(AU_NAMES)):
        raise DimensionMismatch(f"classifier must be binary over {len(AU_NAMES)} AUs, got weights {w.shape}")
    return w[0]


def coefficient_chart(coef, size=(600.0, 300.0)) -> str:
    """Signed bar chart of AU coefficients: positive red, negative blue."""
    width, height = size
    out = _header(width, height)
    colors = [POSITIVE_COLOR if c > 0 else NEGATIVE_COLOR for c in coef]
    _bar_chart(out, 20, 40, width - 40, height - 80, AU_NAMES, np.asarray(coef), "Coefficients", colors, signed=True)
    return _close(out)


def coefficient_faces(classifier: TrainedModel, viz: TrainedModel, scale=1.0, size=400) -> CoefficientFaces:
    """Faces for ``clip(+scale*coef, 0, 1)`` and ``clip(-scale*coef, 0, 1)``."""
    coef = classifier_coefficients(classifier)
    pos = au_to_landmarks(viz, np.clip(scale * coef, 0.0, 1.0))
    neg = au_to_landmarks(viz, np.clip(-scale * coef, 0.0, 1.0))
    neutral = neutral_face(viz)
    return CoefficientFaces(
        pos,
        neg,
        render_face(pos, size, vectors_from=neutral),
        render_face(neg, size, vectors_from=neutral),
        coefficient_chart(coef),
    )
