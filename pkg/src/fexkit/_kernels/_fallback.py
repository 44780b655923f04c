"""Pure numpy implementations of the compiled kernels.

Same signatures and conventions as ``_core.pyx``; selected automatically when
the extension is not built or ``FEXKIT_PURE_PYTHON=1`` is set.
"""

import numpy as np


def _centered_gradients(img):
    h, w = img.shape
    right = img[:, np.minimum(np.arange(w) + 1, w - 1)]
    left = img[:, np.maximum(np.arange(w) - 1, 0)]
    down = img[np.minimum(np.arange(h) + 1, h - 1), :]
    up = img[np.maximum(np.arange(h) - 1, 0), :]
    return 0.5 * (right - left), 0.5 * (down - up)


def cell_histograms(img, n_orient, cell, signed):
    img = np.ascontiguousarray(img, dtype=np.float64)
    h, w = img.shape
    ncy, ncx = h // cell, w // cell
    gx, gy = _centered_gradients(img)
    gx = gx[: ncy * cell, : ncx * cell]
    gy = gy[: ncy * cell, : ncx * cell]
    mag = np.sqrt(gx * gx + gy * gy)
    span = 2.0 * np.pi if signed else np.pi
    width = span / n_orient
    theta = np.arctan2(gy, gx)
    theta = np.where(theta < 0.0, theta + span, theta)
    theta = np.where(theta >= span, theta - span, theta)
    pos = theta / width - 0.5
    lo = np.floor(pos)
    frac = pos - lo
    lo = lo.astype(np.int64)
    b0 = np.mod(lo, n_orient)
    b1 = np.mod(lo + 1, n_orient)

    rows = np.arange(ncy * cell) // cell
    cols = np.arange(ncx * cell) // cell
    cell_index = (rows[:, None] * ncx + cols[None, :]) * n_orient
    size = ncy * ncx * n_orient
    hist = np.bincount((cell_index + b0).ravel(), (mag * (1.0 - frac)).ravel(), size)
    hist += np.bincount((cell_index + b1).ravel(), (mag * frac).ravel(), size)
    return hist.reshape(ncy, ncx, n_orient)


def rasterize_convex(poly, height, width):
    poly = np.asarray(poly, dtype=np.float64)
    ii, jj = np.mgrid[0:height, 0:width]
    ii = ii.astype(np.float64)
    jj = jj.astype(np.float64)
    inside = np.ones((height, width), dtype=bool)
    nxt = np.roll(poly, -1, axis=0)
    for (ax, ay), (bx, by) in zip(poly, nxt):
        inside &= (bx - ax) * (ii - ay) - (by - ay) * (jj - ax) >= 0.0
    return inside.astype(np.uint8)


def warp_similarity(img, a, b, tx, ty, out_h, out_w):
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    ii, jj = np.mgrid[0:out_h, 0:out_w]
    sx = np.clip(a * jj - b * ii + tx, 0.0, w - 1)
    sy = np.clip(b * jj + a * ii + ty, 0.0, h - 1)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    return (1.0 - fy) * ((1.0 - fx) * img[y0, x0] + fx * img[y0, x1]) + fy * (
        (1.0 - fx) * img[y1, x0] + fx * img[y1, x1]
    )


def best_split(X, y, n_classes, candidates, min_leaf):
    n = X.shape[0]
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), y] = 1
    total = onehot.sum(axis=0)
    best = (-1, np.nan, np.inf)
    if n < 2:
        return best
    nl = np.arange(1, n, dtype=np.int64)
    nr = n - nl
    size_ok = (nl >= min_leaf) & (nr >= min_leaf)
    for f in candidates:
        f = int(f)
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        left = np.cumsum(onehot[order], axis=0)[:-1]
        right = total - left
        valid = size_ok & (xs[:-1] < xs[1:])
        if not valid.any():
            continue
        sq_l = (left * left).sum(axis=1)
        sq_r = (right * right).sum(axis=1)
        score = (nl.astype(np.float64) - sq_l.astype(np.float64) / nl.astype(np.float64)) + (
            nr.astype(np.float64) - sq_r.astype(np.float64) / nr.astype(np.float64)
        )
        score = np.where(valid, score, np.inf)
        k = int(np.argmin(score))
        if score[k] < best[2]:
            xa, xb = xs[k], xs[k + 1]
            thr = 0.5 * (xa + xb)
            if thr >= xb:
                thr = xa
            best = (f, float(thr), float(score[k]))
    return best
