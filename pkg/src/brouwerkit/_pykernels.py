"""Pure numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` one-to-one (same arguments, same tie-breaking)
and are used whenever the compiled extension is missing.
"""
import numpy as np

_CHUNK = 2048


def winding_numbers(curve, points):
    """Winding number of a closed polygon around each query point.

    Parameters
    ----------
    curve : (N, 2) array
        Polygon vertices; the last vertex connects back to the first.
    points : (M, 2) array

    Returns
    -------
    (M,) int64 array
    """
    curve = np.ascontiguousarray(curve, dtype=np.float64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    nxt = np.roll(curve, -1, axis=0)
    out = np.empty(len(points), dtype=np.int64)
    for s in range(0, len(points), _CHUNK):
        p = points[s:s + _CHUNK, None, :]
        a = curve[None, :, :] - p
        b = nxt[None, :, :] - p
        cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
        dot = a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]
        total = np.arctan2(cross, dot).sum(axis=1)
        out[s:s + _CHUNK] = np.rint(total / (2.0 * np.pi)).astype(np.int64)
    return out


def polyline_distance(curve, points):
    """Distance from each point to a closed polygon (segments, not vertices)."""
    curve = np.ascontiguousarray(curve, dtype=np.float64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    a = curve
    e = np.roll(curve, -1, axis=0) - curve
    ee = np.einsum("ij,ij->i", e, e)
    ee = np.where(ee > 0.0, ee, 1.0)
    out = np.empty(len(points))
    for s in range(0, len(points), _CHUNK):
        p = points[s:s + _CHUNK, None, :]
        w = p - a[None, :, :]
        t = np.clip(np.einsum("mij,ij->mi", w, e) / ee, 0.0, 1.0)
        d = w - t[..., None] * e[None, :, :]
        out[s:s + _CHUNK] = np.sqrt((d * d).sum(axis=2).min(axis=1))
    return out


def farthest_pair(points, active):
    """Farthest pair among the active points.

    Returns ``(squared_distance, i, j)`` with ``i < j`` the first maximizing
    pair in row-major order, or ``(0.0, -1, -1)`` with fewer than two points.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    idx = np.flatnonzero(np.asarray(active, dtype=bool))
    if len(idx) < 2:
        return 0.0, -1, -1
    pts = points[idx]
    k = len(pts)
    best, bi, bj = -1.0, -1, -1
    rows = max(1, 4_000_000 // max(k, 1))
    cols = np.arange(k)
    for s in range(0, k, rows):
        e = min(k, s + rows)
        diff = pts[s:e, None, :] - pts[None, :, :]
        d2 = (diff * diff).sum(axis=2)
        d2[cols[None, :] <= np.arange(s, e)[:, None]] = -1.0
        flat = int(np.argmax(d2))
        val = float(d2.flat[flat])
        if val > best:
            best = val
            bi = s + flat // k
            bj = flat % k
    if best < 0.0:
        return 0.0, -1, -1
    return best, int(idx[bi]), int(idx[bj])
