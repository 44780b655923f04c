# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Must stay numerically interchangeable with _fallback.py."""

import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, sqrt, floor, M_PI

cnp.import_array()


def cell_histograms(const double[:, ::1] img, int n_orient, int cell, bint signed):
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t ncy = h // cell
    cdef Py_ssize_t ncx = w // cell
    out = np.zeros((ncy, ncx, n_orient), dtype=np.float64)
    cdef double[:, :, ::1] hist = out
    cdef double span = 2.0 * M_PI if signed else M_PI
    cdef double width = span / n_orient
    cdef Py_ssize_t i, j, ci, cj
    cdef double gx, gy, mag, theta, pos, frac
    cdef long lo, b0, b1
    with nogil:
        for i in range(ncy * cell):
            ci = i // cell
            for j in range(ncx * cell):
                cj = j // cell
                gx = 0.5 * (img[i, j + 1 if j + 1 < w else w - 1] - img[i, j - 1 if j > 0 else 0])
                gy = 0.5 * (img[i + 1 if i + 1 < h else h - 1, j] - img[i - 1 if i > 0 else 0, j])
                mag = sqrt(gx * gx + gy * gy)
                if mag == 0.0:
                    continue
                theta = atan2(gy, gx)
                if theta < 0.0:
                    theta = theta + span
                if theta >= span:
                    theta = theta - span
                pos = theta / width - 0.5
                lo = <long>floor(pos)
                frac = pos - lo
                b0 = lo % n_orient
                if b0 < 0:
                    b0 = b0 + n_orient
                b1 = (lo + 1) % n_orient
                if b1 < 0:
                    b1 = b1 + n_orient
                hist[ci, cj, b0] += mag * (1.0 - frac)
                hist[ci, cj, b1] += mag * frac
    return out


def rasterize_convex(const double[:, ::1] poly, Py_ssize_t height, Py_ssize_t width):
    cdef Py_ssize_t m = poly.shape[0]
    out = np.zeros((height, width), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] mask = out
    cdef double xmin = poly[0, 0], xmax = poly[0, 0], ymin = poly[0, 1], ymax = poly[0, 1]
    cdef Py_ssize_t k, i, j, i0, i1, j0, j1
    cdef double ax, ay, bx, by
    cdef bint inside
    for k in range(m):
        xmin = min(xmin, poly[k, 0])
        xmax = max(xmax, poly[k, 0])
        ymin = min(ymin, poly[k, 1])
        ymax = max(ymax, poly[k, 1])
    i0 = max(<Py_ssize_t>floor(ymin), 0)
    i1 = min(<Py_ssize_t>floor(ymax) + 1, height)
    j0 = max(<Py_ssize_t>floor(xmin), 0)
    j1 = min(<Py_ssize_t>floor(xmax) + 1, width)
    with nogil:
        for i in range(i0, i1):
            for j in range(j0, j1):
                inside = True
                for k in range(m):
                    ax = poly[k, 0]
                    ay = poly[k, 1]
                    bx = poly[(k + 1) % m, 0]
                    by = poly[(k + 1) % m, 1]
                    if (bx - ax) * (i - ay) - (by - ay) * (j - ax) < 0.0:
                        inside = False
                        break
                if inside:
                    mask[i, j] = 1
    return out


def warp_similarity(const double[:, ::1] img, double a, double b, double tx, double ty,
                    Py_ssize_t out_h, Py_ssize_t out_w):
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    out = np.empty((out_h, out_w), dtype=np.float64)
    cdef double[:, ::1] dst = out
    cdef Py_ssize_t i, j, x0, y0, x1, y1
    cdef double sx, sy, fx, fy
    with nogil:
        for i in range(out_h):
            for j in range(out_w):
                sx = a * j - b * i + tx
                sy = b * j + a * i + ty
                if sx < 0.0:
                    sx = 0.0
                elif sx > w - 1:
                    sx = w - 1
                if sy < 0.0:
                    sy = 0.0
                elif sy > h - 1:
                    sy = h - 1
                x0 = <Py_ssize_t>floor(sx)
                y0 = <Py_ssize_t>floor(sy)
                x1 = x0 + 1 if x0 + 1 < w else w - 1
                y1 = y0 + 1 if y0 + 1 < h else h - 1
                fx = sx - x0
                fy = sy - y0
                dst[i, j] = ((1.0 - fy) * ((1.0 - fx) * img[y0, x0] + fx * img[y0, x1])
                             + fy * ((1.0 - fx) * img[y1, x0] + fx * img[y1, x1]))
    return out


def best_split(const double[:, ::1] X, const cnp.int64_t[::1] y, int n_classes,
               const cnp.int64_t[::1] candidates, Py_ssize_t min_leaf):
    """Return (feature, threshold, score) or (-1, nan, inf) when no split is valid."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t c, f, k, idx, nl, nr
    cdef long sq_l, sq_r
    cdef double score, best_score = np.inf, best_thr = np.nan
    cdef double xa, xb, thr
    cdef Py_ssize_t best_feat = -1
    left_arr = np.zeros(n_classes, dtype=np.int64)
    total_arr = np.zeros(n_classes, dtype=np.int64)
    cdef cnp.int64_t[::1] left = left_arr
    cdef cnp.int64_t[::1] total = total_arr
    cdef cnp.int64_t[::1] order
    for idx in range(n):
        total[y[idx]] += 1
    for c in range(candidates.shape[0]):
        f = candidates[c]
        order = np.argsort(np.asarray(X[:, f]), kind="stable").astype(np.int64)
        for k in range(n_classes):
            left[k] = 0
        for idx in range(n - 1):
            left[y[order[idx]]] += 1
            nl = idx + 1
            nr = n - nl
            xa = X[order[idx], f]
            xb = X[order[idx + 1], f]
            if not xa < xb:
                continue
            if nl < min_leaf or nr < min_leaf:
                continue
            sq_l = 0
            sq_r = 0
            for k in range(n_classes):
                sq_l += left[k] * left[k]
                sq_r += (total[k] - left[k]) * (total[k] - left[k])
            score = (<double>nl - <double>sq_l / <double>nl) + (<double>nr - <double>sq_r / <double>nr)
            if score < best_score:
                thr = 0.5 * (xa + xb)
                if thr >= xb:
                    thr = xa
                best_score = score
                best_thr = thr
                best_feat = f
    return best_feat, best_thr, best_score
