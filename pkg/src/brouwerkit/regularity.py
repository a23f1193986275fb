"""Degree rasters, F-sets, essential oscillation and the continuity classifier.

An E-raster marks the cells of a y-grid that are certainly covered by a map
on a region: cells with degree >= 1 and cells near the image of the
boundary.  Intersecting E-rasters of shrinking balls about ``a`` gives the
F-set, whose diameter measures the possible values of ``f`` at ``a``.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from math import ceil

import numpy as np
from scipy.ndimage import binary_dilation
from scipy.spatial import ConvexHull, QhullError, cKDTree

from . import kernels
from .degree import image_spacing, solid_angle_degree
from .domain import Ball, boundary_mesh, sphere_mesh
from .errors import ConfigurationError, DomainError, ResolutionError
from .fields import det_adj, sobolev_energy, sphere_trace

__all__ = [
    "ESetRaster",
    "FSetReport",
    "OscillationProfile",
    "EoscCheck",
    "MorreyResult",
    "RetractReport",
    "raster_from_trace",
    "degree_region",
    "mask_diameter",
    "nesting_violations",
    "f_set",
    "point_set_diameter",
    "essential_oscillation",
    "ball_samples",
    "eosc_bound_check",
    "morrey_sphere_check",
    "min_enclosing_ball",
    "retract_violation_measure",
    "grid_modulus",
    "continuity_scan",
]


@dataclass(eq=False)
class ESetRaster:
    """Per-cell degree on a y-grid with boundary flags.

    ``degree`` and ``boundary`` have shape ``(res,) * n`` in ``ij`` order.
    """

    lo: np.ndarray
    hi: np.ndarray
    resolution: int
    degree: np.ndarray
    boundary: np.ndarray

    @property
    def n(self):
        return self.lo.size

    @property
    def h(self):
        return (self.hi - self.lo) / self.resolution

    @property
    def mask(self):
        return (self.degree >= 1) | self.boundary

    def centers(self):
        axes = [self.lo[i] + (np.arange(self.resolution) + 0.5) * self.h[i] for i in range(self.n)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    @property
    def diameter(self):
        return mask_diameter(self, self.mask)

    def to_pgm(self, path, comments=()):
        """Binary PGM: degree + 128 clipped to [0, 254], boundary flag 255."""
        if self.n != 2:
            raise ConfigurationError("PGM export is for planar rasters")
        img = np.clip(self.degree + 128, 0, 254).astype(np.uint8)
        img[self.boundary] = 255
        # rows run from high y to low y
        img = img.T[::-1]
        head = "P5\n" + "".join("# %s\n" % c for c in comments)
        head += "%d %d\n255\n" % (img.shape[1], img.shape[0])
        with open(path, "wb") as fh:
            fh.write(head.encode("ascii"))
            fh.write(img.tobytes())

    def rows(self):
        """``(y..., degree, boundary)`` per cell, row-major."""
        c = self.centers().reshape(-1, self.n)
        return np.column_stack([c, self.degree.ravel(), self.boundary.ravel().astype(int)])


def _window(values_list, pad_frac=0.05, window=None):
    allv = np.concatenate(values_list)
    lo, hi = allv.min(axis=0), allv.max(axis=0)
    span = max(float(np.max(hi - lo)), 1e-9)
    lo = lo - pad_frac * span
    hi = hi + pad_frac * span
    if window is not None:
        wlo, whi = (np.asarray(v, dtype=float) for v in window)
        lo, hi = np.minimum(lo, wlo), np.maximum(hi, whi)
    return lo, hi


def raster_from_trace(mesh, values, lo, hi, resolution):
    """Degree of a boundary trace about every cell centre of a y-grid.

    Cells within ``max(image spacing, half cell diagonal)`` of the image are
    flagged as boundary cells.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = mesh.n
    h = (hi - lo) / resolution
    axes = [lo[i] + (np.arange(resolution) + 0.5) * h[i] for i in range(n)]
    cen = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    thresh = max(image_spacing(mesh, values), 0.5 * float(np.linalg.norm(h)))
    if n == 2:
        curve = values[mesh.elements[:, 0]]
        deg = kernels.winding_numbers(curve, cen)
        dist = kernels.polyline_distance(curve, cen)
        flag = dist <= thresh
    elif n == 3:
        tree = cKDTree(np.concatenate([values, values[mesh.elements].mean(axis=1)]))
        dist, _ = tree.query(cen)
        flag = dist <= thresh
        deg = np.zeros(len(cen), dtype=np.int64)
        far = ~flag
        deg[far] = solid_angle_degree(values, mesh.elements, cen[far])
    else:
        raise ConfigurationError("rasters exist for n in {2, 3}")
    shape = (resolution,) * n
    return ESetRaster(lo, hi, resolution, deg.reshape(shape), flag.reshape(shape))


def degree_region(field, domain, y_window=None, y_resolution=128, bres=256):
    """E-raster of ``field`` on ``domain``.

    The y-window is expanded to cover the image of the boundary if needed.
    """
    mesh = boundary_mesh(domain, bres)
    vals = field(mesh.vertices)
    lo, hi = _window([vals], window=y_window)
    return raster_from_trace(mesh, vals, lo, hi, y_resolution)


def point_set_diameter(points):
    """Largest pairwise distance (convex hull first, then the farthest-pair kernel)."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return 0.0
    cand = pts
    if len(pts) > pts.shape[1] + 1:
        try:
            cand = pts[ConvexHull(pts).vertices]
        except (QhullError, ValueError):
            cand = pts
    d2, _, _ = kernels.farthest_pair(cand, np.ones(len(cand), dtype=bool))
    return float(np.sqrt(d2))


def mask_diameter(raster, mask):
    """Largest distance between centres of masked cells."""
    return point_set_diameter(raster.centers()[mask])


def nesting_violations(inner, outer, slack_cells=1):
    """Cells of ``inner.mask`` outside ``outer.mask`` dilated by ``slack_cells``."""
    if inner.resolution != outer.resolution or not np.allclose(inner.lo, outer.lo):
        raise ConfigurationError("rasters must share a grid")
    st = np.ones((3,) * inner.n, dtype=bool)
    grown = binary_dilation(outer.mask, structure=st, iterations=slack_cells)
    return int(np.count_nonzero(inner.mask & ~grown))


@dataclass(eq=False)
class FSetReport:
    a: np.ndarray
    radii: list
    rasters: list
    mask: np.ndarray
    diameter: float
    osc: list
    mask_diameters: list
    empty: bool

    @property
    def cell(self):
        return float(np.max(self.rasters[0].h))


def f_set(field, a, radii, y_resolution=128, domain=None, sphere_res=512, window=None):
    """Intersection of the E-rasters of ``B_rho(a)`` over the radii (descending)."""
    a = np.asarray(a, dtype=float)
    radii = [float(r) for r in radii]
    if any(r2 >= r1 for r1, r2 in zip(radii, radii[1:])):
        raise ConfigurationError("radii must be strictly descending")
    meshes = [sphere_mesh(a, r, sphere_res, domain) for r in radii]
    vals = [field(m.vertices) for m in meshes]
    lo, hi = _window(vals, window=window)
    rasters = [raster_from_trace(m, v, lo, hi, y_resolution) for m, v in zip(meshes, vals)]
    F = np.logical_and.reduce([r.mask for r in rasters])
    osc = [point_set_diameter(v) for v in vals]
    mdiam = [mask_diameter(r, r.mask) for r in rasters]
    empty = not bool(F.any())
    diam = float("nan") if empty else mask_diameter(rasters[0], F)
    return FSetReport(a, radii, rasters, F, diam, osc, mdiam, empty)


# -- essential oscillation -------------------------------------------------------
def ball_samples(center, radius, domain=None, cells=32):
    """Sample points of ``B_r(x)`` (intersected with ``domain``) used by eosc."""
    p, w = Ball(tuple(np.asarray(center, dtype=float)), float(radius), domain).quadrature(cells)
    return p, w


def _trimmed_diameter(vals, k):
    active = np.ones(len(vals), dtype=bool)
    for _ in range(k):
        _, i, j = kernels.farthest_pair(vals, active)
        if i < 0:
            break
        active[i] = False
        di, _, _ = kernels.farthest_pair(vals, active)
        active[i] = True
        active[j] = False
        dj, _, _ = kernels.farthest_pair(vals, active)
        active[j] = True
        active[i if di <= dj else j] = False
    return float(np.sqrt(kernels.farthest_pair(vals, active)[0]))


def essential_oscillation(field, center, radius, delta=1e-3, domain=None, cells=32):
    """Diameter of the sampled image after greedy removal of ``ceil(delta N)`` extremes.

    Each step finds the farthest pair and drops whichever endpoint shrinks
    the diameter more.
    """
    if not 0.0 <= delta < 0.1:
        raise ConfigurationError("trim fraction must lie in [0, 0.1)")
    p, _ = ball_samples(center, radius, domain, cells)
    if len(p) < 8:
        raise ResolutionError("only %d samples in the ball" % len(p))
    vals = field(p)
    return _trimmed_diameter(vals, int(ceil(delta * len(p))))


@dataclass(frozen=True)
class EoscCheck:
    eosc: float
    osc_sphere: float
    holds: bool
    negative_det_fraction: float


def eosc_bound_check(field, center, radius, delta=1e-3, domain=None, cells=32, sphere_res=256,
                     slack=1.05):
    """``eosc_{B_r} f <= 2 osc_{S_r} f`` with multiplicative slack."""
    c = np.asarray(center, dtype=float)
    e = essential_oscillation(field, c, radius, delta, domain, cells)
    tr = sphere_trace(field, sphere_mesh(c, radius, sphere_res, domain), c, radius)
    osc = point_set_diameter(tr.values)
    p, w = ball_samples(c, radius, domain, cells)
    det = det_adj(field.jacobian(p))[0] if field.m == field.n else np.ones(len(p))
    neg = float(np.dot(w, det < 0.0) / w.sum())
    return EoscCheck(e, osc, bool(e <= 2.0 * osc * slack), neg)


@dataclass(frozen=True)
class MorreyResult:
    osc_n: float
    rhs: float
    ratio: float


def morrey_sphere_check(field, center, radius, sphere_res=256, domain=None):
    """``(osc_S f)^n`` against ``r int_S |df|^n``; ratio 0 when both vanish."""
    c = np.asarray(center, dtype=float)
    n = field.n
    tr = sphere_trace(field, sphere_mesh(c, radius, sphere_res, domain), c, radius)
    lhs = point_set_diameter(tr.values) ** n
    rhs = radius * tr.energy(n)
    ratio = lhs / rhs if rhs > 0.0 else (0.0 if lhs == 0.0 else float("inf"))
    return MorreyResult(float(lhs), float(rhs), float(ratio))


# -- retract ------------------------------------------------------------------
def _circumball(R):
    R = np.asarray(R, dtype=float)
    if len(R) == 0:
        return None, -1.0
    if len(R) == 1:
        return R[0].copy(), 0.0
    p0 = R[0]
    A = R[1:] - p0
    rhs = 0.5 * np.einsum("ij,ij->i", A, A)
    lam = np.linalg.lstsq(A @ A.T, rhs, rcond=None)[0]
    c = p0 + lam @ A
    return c, float(np.linalg.norm(R - c, axis=1).max())


def _welzl(P, R, dim):
    c, r = _circumball(R)
    if len(R) == dim + 1:
        return c, r
    i = 0
    while i < len(P):
        if c is None:
            out = np.array([0])
        else:
            d = np.linalg.norm(P[i:] - c, axis=1)
            out = np.flatnonzero(d > r * (1 + 1e-12) + 1e-15)
        if len(out) == 0:
            break
        j = i + int(out[0])
        c, r = _welzl(P[:j], R + [P[j]], dim)
        i = j + 1
    return c, r


def min_enclosing_ball(points, seed=0):
    """Smallest enclosing ball (Welzl, move-to-front on a seeded shuffle)."""
    P = np.asarray(points, dtype=float)
    P = P[np.random.default_rng(seed).permutation(len(P))]
    c, r = _welzl(P, [], P.shape[1])
    return c, r


@dataclass(frozen=True)
class RetractReport:
    fraction: float
    hull_center: np.ndarray
    hull_radius: float
    negative_det_fraction: float
    note: str


def retract_violation_measure(field, center, radius, domain=None, cells=32, sphere_res=256):
    """Volume fraction of ``B_r(x)`` mapped outside the enclosing ball of ``f(S_r(x))``."""
    c = np.asarray(center, dtype=float)
    tr = sphere_trace(field, sphere_mesh(c, radius, sphere_res, domain), c, radius)
    hc, hr = min_enclosing_ball(tr.values)
    p, w = ball_samples(c, radius, domain, cells)
    v = field(p)
    out = np.linalg.norm(v - hc, axis=1) > hr + 1e-9 * (1.0 + hr)
    frac = float(np.dot(w, out) / w.sum())
    det = det_adj(field.jacobian(p))[0] if field.m == field.n else np.ones(len(p))
    neg = float(np.dot(w, det < 0.0) / w.sum())
    note = "det >= 0 on all samples" if neg == 0.0 else "det < 0 on %.3g of the ball" % neg
    return RetractReport(frac, hc, float(hr), neg, note)


# -- continuity ------------------------------------------------------------------
def grid_modulus(field, domain, res=None):
    """Median jump between adjacent lattice samples inside the domain.

    The median rather than the maximum: a single discontinuity would
    otherwise set the tolerance used to detect it.
    """
    axes = domain.vertex_axes(res)
    n = domain.n
    shape = tuple(len(a) for a in axes)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    inside = domain.contains(pts.reshape(-1, n)).reshape(shape)
    vals = field(pts.reshape(-1, n)).reshape(shape + (field.m,))
    jumps = []
    for ax in range(n):
        a = [slice(None)] * n
        b = [slice(None)] * n
        a[ax] = slice(0, -1)
        b[ax] = slice(1, None)
        ok = inside[tuple(a)] & inside[tuple(b)]
        jumps.append(np.linalg.norm(vals[tuple(b)] - vals[tuple(a)], axis=-1)[ok])
    return float(np.median(np.concatenate(jumps)))


@dataclass(eq=False)
class OscillationProfile:
    """Per-point records and the thresholds that produced the classification."""

    records: list
    thresholds: dict = dc_field(default_factory=dict)

    @property
    def suspect(self):
        return [r for r in self.records if r["classification"] == "suspect"]

    def rows(self):
        """One row per point and radius."""
        out = []
        for i, r in enumerate(self.records):
            for k, rad in enumerate(r["radii"]):
                out.append([i, *r["x"], rad, r["osc"][k], r["eosc"][k], r["energy"][k],
                            r["diam_F"], r["classification"]])
        return out


def continuity_scan(field, domain, points, radii, tol_abs=None, delta=1e-3, y_resolution=64,
                    sphere_res=256, cells=24, with_fset=True, energy_ratio=0.5):
    """Classify sample points as continuous or suspect.

    A point is continuous when the essential oscillation at the finest
    radius is below ``tol_abs`` and the local energy ``int_{B_2r} |grad f|^n``
    falls by at least ``energy_ratio`` from the coarsest to the finest radius.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 4 or any(r2 >= r1 for r1, r2 in zip(radii, radii[1:])):
        raise ConfigurationError("need at least 4 strictly descending radii")
    modulus = grid_modulus(field, domain)
    if tol_abs is None:
        tol_abs = 10.0 * modulus
    n = field.n
    records = []
    for x in np.atleast_2d(np.asarray(points, dtype=float)):
        dist = float(-domain.signed_distance(x))
        if dist <= 0.0:
            raise DomainError("sample point %s is not inside the domain" % x.tolist())
        osc, eosc, energy = [], [], []
        for r in radii:
            if r < dist:
                tr = sphere_trace(field, sphere_mesh(x, r, sphere_res), x, r)
                osc.append(point_set_diameter(tr.values))
            else:
                osc.append(float("nan"))
            eosc.append(essential_oscillation(field, x, r, delta, domain, cells))
            energy.append(sobolev_energy(field, Ball(tuple(x), 2.0 * r, domain), n, cells))
        fit = [r for r in radii if r < dist]
        diam_F = float("nan")
        if with_fset and len(fit) >= 2:
            diam_F = f_set(field, x, fit, y_resolution, None, sphere_res).diameter
        decays = energy[0] == 0.0 or energy[-1] <= energy_ratio * energy[0]
        ok = eosc[-1] < tol_abs and decays
        records.append({"x": x.tolist(), "radii": radii, "osc": osc, "eosc": eosc, "energy": energy,
                        "diam_F": diam_F, "energy_decays": bool(decays),
                        "classification": "continuous" if ok else "suspect"})
    return OscillationProfile(records, {"tol_abs": float(tol_abs), "grid_modulus": modulus,
                                        "delta": delta, "energy_ratio": energy_ratio,
                                        "cells": cells, "sphere_res": sphere_res})
