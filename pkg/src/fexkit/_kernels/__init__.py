"""Hot-loop kernels with a compiled backend and a numpy fallback.

``BACKEND`` is ``"cython"`` when the extension imported, otherwise
``"python"``. Set ``FEXKIT_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _fallback

if os.environ.get("FEXKIT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _core as _impl
    except ImportError:  # extension not built
        _impl = _fallback

BACKEND = "python" if _impl is _fallback else "cython"


def cell_histograms(img, n_orient, cell, signed):
    """Per-cell orientation histograms, shape ``(H//cell, W//cell, n_orient)``."""
    return _impl.cell_histograms(np.ascontiguousarray(img, dtype=np.float64), int(n_orient), int(cell), bool(signed))


def rasterize_convex(poly, height, width):
    """uint8 mask of pixel centres ``(x=col, y=row)`` inside or on a CCW convex polygon."""
    return _impl.rasterize_convex(np.ascontiguousarray(poly, dtype=np.float64), int(height), int(width))


def warp_similarity(img, a, b, tx, ty, out_h, out_w):
    """Bilinear pull-warp: ``out[i, j] = img(a*j - b*i + tx, b*j + a*i + ty)``, edges clamped."""
    return _impl.warp_similarity(
        np.ascontiguousarray(img, dtype=np.float64), float(a), float(b), float(tx), float(ty), int(out_h), int(out_w)
    )


def best_split(X, y, n_classes, candidates, min_leaf):
    """Best Gini split over ``candidates`` in order; strict improvement, lowest threshold wins ties."""
    f, thr, score = _impl.best_split(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.int64),
        int(n_classes),
        np.ascontiguousarray(candidates, dtype=np.int64),
        int(min_leaf),
    )
    return int(f), float(thr), float(score)
