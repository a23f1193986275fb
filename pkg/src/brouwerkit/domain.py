"""Computational domains, boundary meshes and region quadratures.

Only axis-aligned boxes and round balls are supported.  Both have exact
signed distances and nearest-point projections, which is all the rest of the
package needs from the geometry.

Quadrature everywhere is the cell-centred midpoint rule.  Cells cut by a
curved boundary are subsampled: the weight is the inside fraction of the cell
and the node is the centroid of the inside subsamples, which keeps the rule
second order up to the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import ceil

import numpy as np

from .errors import ConfigurationError, DomainError, TubeError

__all__ = [
    "Domain",
    "BoundaryMesh",
    "TubularPoint",
    "Ball",
    "Annulus",
    "make_domain",
    "boundary_mesh",
    "sphere_mesh",
    "tubular_project",
    "inner_domain",
    "ball_template",
    "cell_quadrature",
]

# subsamples per axis for cells cut by a curved boundary
_SUB = {2: 16, 3: 6}
_CHUNK = 1 << 20


def _sub(n):
    return _SUB.get(n, 4)


def cell_quadrature(lo, hi, res, sdf=None, sub=None, chunk=_CHUNK):
    """Midpoint rule on a regular cell grid, yielded in chunks.

    Parameters
    ----------
    lo, hi : (n,) arrays
        Corners of the cell grid.
    res : int or (n,) ints
        Cells per axis.
    sdf : callable, optional
        Signed distance of the region (negative inside).  ``None`` means the
        whole grid.
    sub : int, optional
        Subsamples per axis for cut cells.

    Yields
    ------
    points : (k, n) array
    weights : (k,) array
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    res = np.broadcast_to(np.asarray(res, dtype=int), (n,))
    h = (hi - lo) / res
    vol = float(np.prod(h))
    half_diag = 0.5 * float(np.linalg.norm(h))
    sub = _sub(n) if sub is None else sub
    axes = [lo[i] + (np.arange(res[i]) + 0.5) * h[i] for i in range(n)]
    inner = int(np.prod(res[1:]))
    rows = max(1, chunk // max(inner, 1))
    if sdf is not None:
        t = (np.arange(sub) + 0.5) / sub - 0.5
        offs = np.stack(np.meshgrid(*([t] * n), indexing="ij"), axis=-1).reshape(-1, n) * h
    for s in range(0, res[0], rows):
        grids = np.meshgrid(axes[0][s:s + rows], *axes[1:], indexing="ij")
        pts = np.stack(grids, axis=-1).reshape(-1, n)
        if sdf is None:
            yield pts, np.full(len(pts), vol)
            continue
        d = sdf(pts)
        full = d < -half_diag
        cut = np.flatnonzero(np.abs(d) <= half_diag)
        out_p = [pts[full]]
        out_w = [np.full(int(full.sum()), vol)]
        for c0 in range(0, len(cut), max(1, chunk // len(offs))):
            cc = cut[c0:c0 + max(1, chunk // len(offs))]
            sp = pts[cc, None, :] + offs[None, :, :]
            ins = sdf(sp.reshape(-1, n)).reshape(len(cc), len(offs)) < 0.0
            cnt = ins.sum(axis=1)
            keep = cnt > 0
            cen = (sp * ins[..., None]).sum(axis=1)[keep] / cnt[keep, None]
            out_p.append(cen)
            out_w.append(vol * cnt[keep] / len(offs))
        p = np.concatenate(out_p)
        w = np.concatenate(out_w)
        # restore row-major order for a deterministic summation
        order = np.lexsort(p.T[::-1])
        yield p[order], w[order]


def _gather(chunks):
    ps, ws = zip(*chunks)
    return np.concatenate(ps), np.concatenate(ws)


@lru_cache(maxsize=32)
def ball_template(n, cells=32, sub=None):
    """Quadrature of the unit ball: ``cells`` cells across the diameter.

    Returns read-only ``(offsets, weights)``; weights sum to about the unit
    ball volume.
    """
    lo = -np.ones(n)
    p, w = _gather(cell_quadrature(lo, -lo, cells, lambda x: np.linalg.norm(x, axis=-1) - 1.0, sub))
    p.setflags(write=False)
    w.setflags(write=False)
    return p, w


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Closed, outward-oriented polygon (n=2) or triangle mesh (n=3).

    Attributes
    ----------
    vertices : (V, n) array
    elements : (E, n) int array
        Segments ``(a, b)`` ordered counter-clockwise, or triangles
        ``(a, b, c)`` with ``(b-a) x (c-a)`` pointing outward.
    """

    vertices: np.ndarray
    elements: np.ndarray

    @property
    def n(self):
        return self.vertices.shape[1]

    @cached_property
    def measures(self):
        v = self.vertices[self.elements]
        if self.n == 2:
            return np.linalg.norm(v[:, 1] - v[:, 0], axis=1)
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    @cached_property
    def normals(self):
        v = self.vertices[self.elements]
        if self.n == 2:
            e = v[:, 1] - v[:, 0]
            nrm = np.stack([e[:, 1], -e[:, 0]], axis=1)
        else:
            nrm = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        return nrm / np.linalg.norm(nrm, axis=1, keepdims=True)

    @cached_property
    def centroids(self):
        return self.vertices[self.elements].mean(axis=1)

    @cached_property
    def vertex_weights(self):
        """Dual measure of each vertex (element measure shared equally)."""
        w = np.zeros(len(self.vertices))
        share = np.repeat(self.measures / self.n, self.n)
        np.add.at(w, self.elements.ravel(), share)
        return w

    @property
    def total_measure(self):
        return float(self.measures.sum())

    @property
    def spacing(self):
        """Longest element edge."""
        v = self.vertices[self.elements]
        k = self.n
        return float(max(np.linalg.norm(v[:, (i + 1) % k] - v[:, i], axis=1).max() for i in range(k)))

    def is_closed(self):
        """Every directed edge has exactly one reversed partner."""
        el = self.elements
        k = self.n
        if k == 2:
            a, b = el[:, 0], el[:, 1]
            start = np.bincount(a, minlength=len(self.vertices))
            end = np.bincount(b, minlength=len(self.vertices))
            return bool(np.all(start == end) and np.all(start[np.unique(el)] == 1))
        e = np.concatenate([el[:, [i, (i + 1) % 3]] for i in range(3)])
        fwd = {tuple(x) for x in e.tolist()}
        if len(fwd) != len(e):
            return False
        return all((b, a) in fwd for a, b in fwd)


@dataclass(frozen=True)
class TubularPoint:
    projection: np.ndarray
    signed_distance: float
    reflection: np.ndarray


@dataclass(frozen=True)
class Domain:
    """A box or ball in R^n with a cell grid of ``resolution`` cells per axis.

    Use :func:`make_domain` to construct.  For a ball the grid covers the
    bounding box and only cells meeting the ball are used.
    """

    kind: str
    n: int
    lo: tuple
    hi: tuple
    center: tuple
    radius: float
    resolution: int
    tube_fraction: float = 0.1

    # -- geometry -----------------------------------------------------------
    @cached_property
    def bbox(self):
        return np.array(self.lo, dtype=float), np.array(self.hi, dtype=float)

    @cached_property
    def h(self):
        lo, hi = self.bbox
        return (hi - lo) / self.resolution

    @property
    def cell_volume(self):
        return float(np.prod(self.h))

    @property
    def min_feature(self):
        if self.kind == "ball":
            return float(self.radius)
        lo, hi = self.bbox
        return float(np.min(hi - lo))

    @property
    def tube_width(self):
        return self.tube_fraction * self.min_feature

    @cached_property
    def volume(self):
        if self.kind == "box":
            lo, hi = self.bbox
            return float(np.prod(hi - lo))
        from math import gamma, pi
        return pi ** (self.n / 2) / gamma(self.n / 2 + 1) * self.radius ** self.n

    def signed_distance(self, x):
        """Signed distance to the boundary, negative inside."""
        x = np.asarray(x, dtype=float)
        c = np.asarray(self.center)
        if self.kind == "ball":
            return np.linalg.norm(x - c, axis=-1) - self.radius
        lo, hi = self.bbox
        q = np.abs(x - c) - 0.5 * (hi - lo)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    def distance_to_boundary(self, x):
        return np.abs(self.signed_distance(x))

    def contains(self, x, margin=0.0):
        """Strictly inside with clearance ``margin`` from the boundary."""
        return self.signed_distance(x) < -margin

    def project(self, x):
        """Nearest boundary point, vectorized over the leading axes."""
        x = np.asarray(x, dtype=float)
        c = np.asarray(self.center)
        if self.kind == "ball":
            d = x - c
            r = np.linalg.norm(d, axis=-1, keepdims=True)
            r = np.where(r > 0.0, r, 1.0)
            return c + self.radius * d / r
        lo, hi = self.bbox
        out = np.clip(x, lo, hi)
        inside = np.all((x > lo) & (x < hi), axis=-1)
        if np.any(inside):
            xi = x[inside]
            gap = np.minimum(xi - lo, hi - xi)
            k = np.argmin(gap, axis=-1)
            rows = np.arange(len(xi))
            near_hi = (hi - xi)[rows, k] < (xi - lo)[rows, k]
            p = xi.copy()
            p[rows, k] = np.where(near_hi, hi[k], lo[k])
            out[inside] = p
        return out

    def reflect(self, x):
        """``2 P(x) - x`` for points in the tube; raises outside it."""
        x = np.asarray(x, dtype=float)
        sd = self.signed_distance(x)
        if np.any(np.abs(sd) > self.tube_width):
            raise TubeError("point outside the tubular neighbourhood of width %g" % self.tube_width)
        return 2.0 * self.project(x) - x

    # -- grids and quadrature ----------------------------------------------
    def _sdf(self):
        return None if self.kind == "box" else self.signed_distance

    def iter_quadrature(self, res=None, chunk=_CHUNK):
        lo, hi = self.bbox
        return cell_quadrature(lo, hi, self.resolution if res is None else res, self._sdf(), chunk=chunk)

    def quadrature(self, res=None):
        """All midpoint nodes and weights at once (``res`` overrides the grid)."""
        return _gather(self.iter_quadrature(res))

    def grid_points(self):
        """Cell centres lying strictly inside the domain."""
        lo, hi = self.bbox
        axes = [lo[i] + (np.arange(self.resolution) + 0.5) * self.h[i] for i in range(self.n)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
        return pts[self.contains(pts)]

    def vertex_axes(self, res=None):
        """Vertex lattice coordinates (``res + 1`` per axis) over the bounding box."""
        lo, hi = self.bbox
        res = self.resolution if res is None else res
        return [np.linspace(lo[i], hi[i], res + 1) for i in range(self.n)]


def make_domain(kind, extent, resolution, tube_fraction=0.1):
    """Build a :class:`Domain`.

    Parameters
    ----------
    kind : {"box", "ball"}
    extent : tuple
        ``(lo, hi)`` for a box, ``(center, radius)`` for a ball.
    resolution : int
        Cells per axis, at least 8.
    """
    if resolution < 8:
        raise ConfigurationError("resolution must be >= 8, got %r" % (resolution,))
    if not 0.0 < tube_fraction < 0.5:
        raise ConfigurationError("tube fraction must lie in (0, 0.5)")
    if kind == "ball":
        center, radius = extent
        c = np.atleast_1d(np.asarray(center, dtype=float))
        radius = float(radius)
        if not radius > 0.0 or not np.all(np.isfinite(c)):
            raise ConfigurationError("ball radius must be positive")
        lo, hi = c - radius, c + radius
    elif kind == "box":
        lo, hi = (np.atleast_1d(np.asarray(v, dtype=float)) for v in extent)
        if lo.shape != hi.shape or not np.all(hi > lo):
            raise ConfigurationError("box extent must satisfy hi > lo componentwise")
        c = 0.5 * (lo + hi)
        radius = 0.0
    else:
        raise ConfigurationError("unknown domain kind %r" % (kind,))
    n = c.size
    if n < 2:
        raise ConfigurationError("dimension must be >= 2")
    return Domain(kind, n, tuple(lo.tolist()), tuple(hi.tolist()), tuple(c.tolist()),
                  radius, int(resolution), float(tube_fraction))


# -- meshes ------------------------------------------------------------------
def _dedupe(points, tris):
    key = np.round(points, 12)
    _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    # keep vertices in order of first appearance
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return points[first[order]], rank[inv.ravel()][tris]


def _orient_outward(vertices, tris, center):
    v = vertices[tris]
    nrm = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    flip = np.einsum("ij,ij->i", nrm, v.mean(axis=1) - center) < 0.0
    tris = tris.copy()
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def _polygon_circle(center, r, N):
    t = 2.0 * np.pi * np.arange(N) / N
    v = np.asarray(center) + r * np.stack([np.cos(t), np.sin(t)], axis=1)
    el = np.stack([np.arange(N), (np.arange(N) + 1) % N], axis=1)
    return BoundaryMesh(v, el)


_ICO = None


def _icosahedron():
    global _ICO
    if _ICO is None:
        p = (1.0 + 5 ** 0.5) / 2.0
        v = np.array([[-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
                      [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
                      [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1]], dtype=float)
        f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                      [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                      [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                      [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
        _ICO = (v / np.linalg.norm(v, axis=1, keepdims=True), f)
    return _ICO


def _icosphere(center, r, freq):
    v0, f0 = _icosahedron()
    pts, tris = [], []
    base = 0
    for a, b, c in f0:
        A, B, C = v0[a], v0[b], v0[c]
        idx = {}
        loc = []
        for i in range(freq + 1):
            for j in range(freq + 1 - i):
                idx[i, j] = len(loc)
                loc.append(A + (B - A) * i / freq + (C - A) * j / freq)
        for i in range(freq):
            for j in range(freq - i):
                tris.append([base + idx[i, j], base + idx[i + 1, j], base + idx[i, j + 1]])
                if j + i + 1 < freq:
                    tris.append([base + idx[i + 1, j], base + idx[i + 1, j + 1], base + idx[i, j + 1]])
        pts.extend(loc)
        base += len(loc)
    pts = np.array(pts)
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    v, t = _dedupe(pts, np.array(tris))
    v = np.asarray(center) + r * v
    return BoundaryMesh(v, _orient_outward(v, t, np.asarray(center)))


def _box_polygon(lo, hi, res):
    side = hi - lo
    per = 2.0 * side.sum()
    nx = max(1, int(round(res * side[0] / per)))
    ny = max(1, int(round(res * side[1] / per)))
    xs = np.linspace(lo[0], hi[0], nx + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    pts = np.concatenate([
        np.stack([xs[:-1], np.full(nx, lo[1])], axis=1),
        np.stack([np.full(ny, hi[0]), ys[:-1]], axis=1),
        np.stack([xs[::-1][:-1], np.full(nx, hi[1])], axis=1),
        np.stack([np.full(ny, lo[0]), ys[::-1][:-1]], axis=1),
    ])
    N = len(pts)
    return BoundaryMesh(pts, np.stack([np.arange(N), (np.arange(N) + 1) % N], axis=1))


def _box_surface(lo, hi, res):
    side = hi - lo
    k = max(side) / max(1, res)
    counts = [max(1, int(ceil(s / k))) for s in side]
    pts, tris = [], []
    for ax in range(3):
        u, w = [a for a in range(3) if a != ax]
        gu = np.linspace(lo[u], hi[u], counts[u] + 1)
        gw = np.linspace(lo[w], hi[w], counts[w] + 1)
        for val in (lo[ax], hi[ax]):
            base = len(pts)
            for a in gu:
                for b in gw:
                    p = np.empty(3)
                    p[ax], p[u], p[w] = val, a, b
                    pts.append(p)
            m = len(gw)
            for i in range(len(gu) - 1):
                for j in range(m - 1):
                    q = base + i * m + j
                    tris.append([q, q + m, q + m + 1])
                    tris.append([q, q + m + 1, q + 1])
    v, t = _dedupe(np.array(pts), np.array(tris))
    return BoundaryMesh(v, _orient_outward(v, t, 0.5 * (lo + hi)))


def _ball_mesh(center, r, res, n):
    if n == 2:
        return _polygon_circle(center, r, res)
    if n == 3:
        return _icosphere(center, r, int(ceil(res / 5)))
    raise ConfigurationError("boundary meshes exist for n in {2, 3} only")


def boundary_mesh(domain, boundary_resolution=256):
    """Discretize the boundary of ``domain``.

    ``boundary_resolution`` is the number of polygon vertices for n=2; for
    n=3 balls it sets the icosphere frequency ``ceil(res/5)`` and for boxes the
    number of faces along the longest side.
    """
    if boundary_resolution < 16:
        raise ConfigurationError("boundary resolution must be >= 16")
    lo, hi = domain.bbox
    if domain.kind == "ball":
        return _ball_mesh(domain.center, domain.radius, boundary_resolution, domain.n)
    if domain.n == 2:
        return _box_polygon(lo, hi, boundary_resolution)
    if domain.n == 3:
        return _box_surface(lo, hi, max(4, boundary_resolution // 8))
    raise ConfigurationError("boundary meshes exist for n in {2, 3} only")


def sphere_mesh(center, radius, resolution=256, domain=None):
    """Mesh of the sphere ``S_r(a)``; with a domain, requires ``B_r(a)`` inside it."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if not radius > 0.0:
        raise ConfigurationError("sphere radius must be positive")
    if domain is not None:
        if c.size != domain.n:
            raise ConfigurationError("centre dimension does not match the domain")
        if not float(-domain.signed_distance(c)) > radius:
            raise DomainError("sphere S_%g(%s) is not contained in the domain" % (radius, c.tolist()))
    return _ball_mesh(c, float(radius), resolution, c.size)


def tubular_project(domain, x):
    """Nearest boundary point, signed distance and reflection ``2P(x) - x``."""
    x = np.asarray(x, dtype=float)
    sd = float(domain.signed_distance(x))
    if abs(sd) > domain.tube_width:
        raise TubeError("|dist| = %g exceeds the tube width %g" % (abs(sd), domain.tube_width))
    p = domain.project(x[None, :])[0]
    return TubularPoint(p, sd, 2.0 * p - x)


def inner_domain(domain, eps):
    """``{x in domain : dist(x, boundary) > eps}``, same kind and resolution."""
    if not 0.0 < eps < 0.5 * domain.min_feature:
        raise DomainError("eps = %g must lie in (0, %g)" % (eps, 0.5 * domain.min_feature))
    if domain.kind == "ball":
        return make_domain("ball", (domain.center, domain.radius - eps), domain.resolution, domain.tube_fraction)
    lo, hi = domain.bbox
    return make_domain("box", (lo + eps, hi - eps), domain.resolution, domain.tube_fraction)


# -- simple regions ----------------------------------------------------------
@dataclass(frozen=True)
class Ball:
    """Ball ``B_r(a)``, optionally intersected with a domain."""

    center: tuple
    radius: float
    clip: Domain | None = None

    def quadrature(self, cells=32):
        c = np.asarray(self.center, dtype=float)
        off, w = ball_template(c.size, cells)
        p = c + self.radius * off
        w = w * self.radius ** c.size
        if self.clip is not None:
            keep = self.clip.contains(p)
            p, w = p[keep], w[keep]
        return p, w

    def iter_quadrature(self, cells=32):
        yield self.quadrature(cells)


@dataclass(frozen=True)
class Annulus:
    """``{r_in < |x - a| < r_out}``; a polar rule in the plane."""

    center: tuple
    r_in: float
    r_out: float

    def quadrature(self, res=256):
        c = np.asarray(self.center, dtype=float)
        if c.size == 2:
            # midpoint in log r keeps 1/r^k integrands well resolved
            nr = res
            nt = 4 * res
            s = np.log(self.r_in) + (np.arange(nr) + 0.5) * (np.log(self.r_out / self.r_in) / nr)
            r = np.exp(s)
            t = (np.arange(nt) + 0.5) * (2.0 * np.pi / nt)
            R, T = np.meshgrid(r, t, indexing="ij")
            pts = c + np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)
            w = (R ** 2).ravel() * (np.log(self.r_out / self.r_in) / nr) * (2.0 * np.pi / nt)
            return pts, w
        lo = c - self.r_out

        def sdf(x):
            d = np.linalg.norm(x - c, axis=-1)
            return np.maximum(d - self.r_out, self.r_in - d)

        return _gather(cell_quadrature(lo, c + self.r_out, res, sdf))

    def iter_quadrature(self, res=256):
        yield self.quadrature(res)


def region_points(region, res=None):
    """Quadrature chunks for a Domain, Ball or Annulus."""
    if isinstance(region, Domain):
        return region.iter_quadrature(res)
    if isinstance(region, Ball):
        return region.iter_quadrature(32 if res is None else res)
    if isinstance(region, Annulus):
        return region.iter_quadrature(256 if res is None else res)
    raise ConfigurationError("unsupported region %r" % (region,))

