# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, sqrt, M_PI, floor

cnp.import_array()


def winding_numbers(curve, points):
    cdef double[:, ::1] c = np.ascontiguousarray(curve, dtype=np.float64)
    cdef double[:, ::1] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], m = p.shape[0], i, k, kn
    cdef double px, py, ax, ay, bx, by, total
    out = np.empty(m, dtype=np.int64)
    cdef long long[::1] o = out
    for i in range(m):
        px = p[i, 0]
        py = p[i, 1]
        total = 0.0
        for k in range(n):
            kn = k + 1
            if kn == n:
                kn = 0
            ax = c[k, 0] - px
            ay = c[k, 1] - py
            bx = c[kn, 0] - px
            by = c[kn, 1] - py
            total += atan2(ax * by - ay * bx, ax * bx + ay * by)
        o[i] = <long long>floor(total / (2.0 * M_PI) + 0.5)
    return out


def polyline_distance(curve, points):
    cdef double[:, ::1] c = np.ascontiguousarray(curve, dtype=np.float64)
    cdef double[:, ::1] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], m = p.shape[0], i, k, kn
    cdef double px, py, ex, ey, wx, wy, ee, t, dx, dy, d2, best
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(m):
        px = p[i, 0]
        py = p[i, 1]
        best = 1e300
        for k in range(n):
            kn = k + 1
            if kn == n:
                kn = 0
            ex = c[kn, 0] - c[k, 0]
            ey = c[kn, 1] - c[k, 1]
            wx = px - c[k, 0]
            wy = py - c[k, 1]
            ee = ex * ex + ey * ey
            if ee <= 0.0:
                ee = 1.0
            t = (wx * ex + wy * ey) / ee
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            dx = wx - t * ex
            dy = wy - t * ey
            d2 = dx * dx + dy * dy
            if d2 < best:
                best = d2
        o[i] = sqrt(best)
    return out


def farthest_pair(points, active):
    cdef double[:, ::1] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef cnp.uint8_t[::1] act = np.ascontiguousarray(active, dtype=np.uint8)
    cdef Py_ssize_t n = p.shape[0], d = p.shape[1], i, j, k
    cdef double best = -1.0, s, t
    cdef Py_ssize_t bi = -1, bj = -1
    for i in range(n):
        if not act[i]:
            continue
        for j in range(i + 1, n):
            if not act[j]:
                continue
            s = 0.0
            for k in range(d):
                t = p[i, k] - p[j, k]
                s = s + t * t
            if s > best:
                best = s
                bi = i
                bj = j
    if best < 0.0:
        return 0.0, -1, -1
    return best, bi, bj
