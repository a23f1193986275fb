"""Brouwer degree by preimage counting, by the bump integral, and from boundary data.

The three routes share nothing beyond map evaluation:

* counting scans the vertex lattice for cells where every component of
  ``f - y`` changes sign, polishes with Newton, and sums ``sign det``;
* the integral route averages ``det grad f`` against a smooth bump ``g``
  centred at ``y``;
* the boundary route integrates the pull-back of the (n-1)-form built from
  the Newtonian potential field of ``g`` over the boundary mesh.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from math import gamma, pi

import numpy as np
from scipy import integrate as sp_integrate

from . import kernels
from .domain import ball_template, boundary_mesh, inner_domain
from .errors import (BoundaryProximityError, ConfigurationError, DegenerateError,
                     SupportError)
from .fields import MapField, det_adj

__all__ = [
    "DegreeReport",
    "AxiomReport",
    "bump",
    "bump_mass",
    "boundary_image",
    "image_clearance",
    "winding_number",
    "solid_angle_degree",
    "degree_by_counting",
    "degree_by_integral",
    "boundary_pullback_degree",
    "winding_degree",
    "image_spacing",
    "integral_raw",
    "newton_field",
    "degree",
    "degree_axiom_harness",
]


@dataclass
class DegreeReport:
    """Degree of a map at ``y`` by one method.

    ``raw`` is the unrounded value (integral and boundary routes);
    ``inconclusive`` is set whenever the rounding residual reaches 0.5 or a
    Newton solve failed inside the domain.
    """

    y: np.ndarray
    method: str
    value: int | None
    raw: float
    residual: float
    preimages: list = dc_field(default_factory=list)
    inconclusive: bool = False
    diagnostics: dict = dc_field(default_factory=dict)

    def record(self):
        return {
            "method": self.method,
            "y": [float(v) for v in self.y],
            "value": self.value,
            "raw": float(self.raw),
            "residual": float(self.residual),
            "inconclusive": bool(self.inconclusive),
            "preimages": [[[float(v) for v in p], int(s)] for p, s in self.preimages],
            "diagnostics": {k: _plain(v) for k, v in self.diagnostics.items()},
        }


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _sphere_area(n):
    return 2.0 * pi ** (n / 2) / gamma(n / 2)


def bump(w, y, radius):
    """``exp(-1/(1 - |u|^2))`` with ``u = (w - y)/radius``, zero outside."""
    u = (np.asarray(w, dtype=float) - y) / radius
    s = np.einsum("...i,...i->...", u, u)
    q = np.where(s < 1.0, 1.0 - s, 1.0)
    return np.where(s < 1.0, np.exp(-1.0 / q), 0.0)


@lru_cache(maxsize=8)
def _unit_bump_mass(n):
    val, _ = sp_integrate.quad(lambda s: np.exp(-1.0 / (1.0 - s * s)) * s ** (n - 1), 0.0, 1.0,
                               epsabs=0.0, epsrel=1e-13)
    return _sphere_area(n) * val


def bump_mass(n, radius):
    """``int g`` by radial quadrature."""
    return _unit_bump_mass(n) * radius ** n


def boundary_image(field, mesh):
    return field(mesh.vertices)


def _point_triangle_distance(p, tri):
    """Distance from one point to many triangles ``(T, 3, 3)``."""
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab, ac, ap = b - a, c - a, p - a
    n = np.cross(ab, ac)
    nn = np.einsum("ij,ij->i", n, n)
    nn = np.where(nn > 0, nn, 1.0)
    # barycentric projection onto the plane
    q = p - (np.einsum("ij,ij->i", ap, n) / nn)[:, None] * n
    v0, v1, v2 = ab, ac, q - a
    d00 = np.einsum("ij,ij->i", v0, v0)
    d01 = np.einsum("ij,ij->i", v0, v1)
    d11 = np.einsum("ij,ij->i", v1, v1)
    d20 = np.einsum("ij,ij->i", v2, v0)
    d21 = np.einsum("ij,ij->i", v2, v1)
    den = d00 * d11 - d01 * d01
    den = np.where(den != 0, den, 1.0)
    bv = (d11 * d20 - d01 * d21) / den
    bw = (d00 * d21 - d01 * d20) / den
    inside = (bv >= 0) & (bw >= 0) & (bv + bw <= 1)
    best = np.where(inside, np.linalg.norm(p - q, axis=1), np.inf)
    for s, e in ((a, b), (b, c), (c, a)):
        d = e - s
        dd = np.einsum("ij,ij->i", d, d)
        t = np.clip(np.einsum("ij,ij->i", p - s, d) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
        best = np.minimum(best, np.linalg.norm(p - (s + t[:, None] * d), axis=1))
    return best


def image_clearance(field, mesh, y, values=None):
    """Distance from ``y`` to the image of the boundary mesh (piecewise linear)."""
    y = np.asarray(y, dtype=float)
    vals = boundary_image(field, mesh) if values is None else values
    if mesh.n == 2:
        ordered = vals[mesh.elements[:, 0]]
        return float(kernels.polyline_distance(ordered, y[None, :])[0])
    return float(_point_triangle_distance(y, vals[mesh.elements]).min())


def image_spacing(mesh, values):
    """Longest image edge of the boundary mesh."""
    v = values[mesh.elements]
    k = mesh.n
    return float(max(np.linalg.norm(v[:, (i + 1) % k] - v[:, i], axis=1).max() for i in range(k)))


def winding_number(curve, y):
    """Winding number of the closed polygon ``curve`` about ``y`` (angle sum)."""
    curve = np.asarray(curve, dtype=float)
    y = np.asarray(y, dtype=float)
    if curve.ndim != 2 or curve.shape[1] != 2:
        raise ConfigurationError("winding numbers need a planar closed curve")
    if np.min(np.linalg.norm(curve - y, axis=1)) <= 1e-12:
        raise DegenerateError("curve passes through the query point")
    return int(kernels.winding_numbers(curve, y[None, :])[0])


def solid_angle_degree(vertices, triangles, points):
    """Degree of a closed oriented triangle surface about each point.

    Sums signed solid angles (Van Oosterom and Strackee) and divides by 4 pi.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    tri = vertices[triangles]
    out = np.empty(len(pts), dtype=np.int64)
    for i, p in enumerate(pts):
        a, b, c = tri[:, 0] - p, tri[:, 1] - p, tri[:, 2] - p
        la, lb, lc = (np.linalg.norm(v, axis=1) for v in (a, b, c))
        num = np.einsum("ij,ij->i", a, np.cross(b, c))
        den = (la * lb * lc + np.einsum("ij,ij->i", a, b) * lc
               + np.einsum("ij,ij->i", a, c) * lb + np.einsum("ij,ij->i", b, c) * la)
        out[i] = int(np.rint(2.0 * np.arctan2(num, den).sum() / (4.0 * pi)))
    return out


def _mesh_for(domain, mesh, bres):
    return boundary_mesh(domain, bres) if mesh is None else mesh


def _check_margin(field, mesh, y, margin, values=None):
    vals = boundary_image(field, mesh) if values is None else values
    clr = image_clearance(field, mesh, y, vals)
    if margin is None:
        margin = 2.0 * image_spacing(mesh, vals)
    if not clr > margin:
        raise BoundaryProximityError(
            "dist(y, f(boundary)) = %.3g does not exceed the margin %.3g" % (clr, margin))
    return clr, margin


# -- counting ----------------------------------------------------------------
def _candidates(field, domain, y, res):
    axes = domain.vertex_axes(res)
    n = domain.n
    shape = tuple(len(a) for a in axes)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    F = (field(pts) - y).reshape(shape + (n,))
    lo = np.full(tuple(s - 1 for s in shape) + (n,), np.inf)
    hi = np.full_like(lo, -np.inf)
    for corner in np.ndindex(*(2,) * n):
        sl = tuple(slice(c, c + s - 1) for c, s in zip(corner, shape))
        lo = np.minimum(lo, F[sl])
        hi = np.maximum(hi, F[sl])
    hit = np.all((lo <= 0.0) & (hi >= 0.0), axis=-1)
    idx = np.argwhere(hit)
    h = np.array([a[1] - a[0] for a in axes])
    starts = np.array([a[0] for a in axes])
    return starts + (idx + 0.5) * h, h


def _newton(field, x0, y, tol, maxit=50):
    x = x0.copy()
    n = field.n
    for _ in range(maxit):
        r = field(x[None, :])[0] - y
        nr = float(np.linalg.norm(r))
        if nr < tol:
            return x, True
        J = field.jacobian(x[None, :])[0]
        try:
            step = np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, r, rcond=None)[0]
        # damp when the Jacobian is close to singular
        cond_det = abs(float(np.linalg.det(J)))
        scale = float(np.linalg.norm(J)) ** n
        lam = 1.0 if cond_det > 1e-6 * max(scale, 1e-300) else 0.5
        for _ in range(30):
            xn = x - lam * step
            if np.linalg.norm(field(xn[None, :])[0] - y) < nr or lam < 1e-6:
                break
            lam *= 0.5
        x = xn
    return x, bool(np.linalg.norm(field(x[None, :])[0] - y) < tol)


def degree_by_counting(field, domain, y, tol=1e-10, tau_regular=None, margin=None, mesh=None,
                       bres=256, res=None, max_perturb=3):
    """Sum of ``sign det grad f`` over the preimages of ``y``.

    Preimages with ``|det| <= tau_regular`` trigger a probe perturbation by
    one cell diagonal (at most ``max_perturb`` times) instead of being counted.
    """
    y0 = np.asarray(y, dtype=float)
    mesh = _mesh_for(domain, mesh, bres)
    vals = boundary_image(field, mesh)
    clr, margin = _check_margin(field, mesh, y0, margin, vals)
    res = domain.resolution if res is None else res
    if tau_regular is None:
        sample = domain.grid_points()[:: max(1, len(domain.grid_points()) // 512)]
        scale = float(np.median(np.linalg.norm(field.jacobian(sample), axis=(1, 2))))
        tau_regular = 1e-8 * max(scale, 1e-300) ** field.n
    h_diag = float(np.linalg.norm(domain.h)) * domain.resolution / res
    direction = np.ones(field.n) / np.sqrt(field.n)
    y_cur = y0
    diag = {"tau_regular": tau_regular, "scan_resolution": res, "clearance": clr, "margin": margin,
            "perturbations": 0}
    for attempt in range(max_perturb + 1):
        cand, h = _candidates(field, domain, y_cur, res)
        roots, failed, singular = [], False, False
        dedupe = max(1e-7, 1e-6 * float(np.min(h)))
        for c in cand:
            z, ok = _newton(field, c, y_cur, tol)
            if not ok:
                # a failed solve that stays near its start cell is a real failure
                if np.linalg.norm(z - c) < 2.0 * np.linalg.norm(h) and domain.contains(z):
                    failed = True
                continue
            if not domain.contains(z):
                continue
            if any(np.linalg.norm(z - r) < dedupe for r, _ in roots):
                continue
            det = float(det_adj(field.jacobian(z[None, :]))[0][0])
            if abs(det) <= tau_regular:
                singular = True
                break
            roots.append((z, 1 if det > 0 else -1))
        if not singular:
            break
        diag["perturbations"] = attempt + 1
        rot = np.roll(direction, attempt) * (1 if attempt % 2 == 0 else -1)
        y_cur = y0 + h_diag * (attempt + 1) * rot
    if singular:
        return DegreeReport(y0, "counting", None, float("nan"), float("nan"), [], True, diag)
    value = int(sum(s for _, s in roots))
    diag["y_used"] = y_cur
    return DegreeReport(y0, "counting", value, float(value), 0.0, roots, failed, diag)


# -- integral ----------------------------------------------------------------
def _check_support(field, mesh, y, radius, values=None):
    clr = image_clearance(field, mesh, y, values)
    if not clr > radius:
        raise SupportError("bump support B_%.3g(y) meets f(boundary) (clearance %.3g)" % (radius, clr))
    return clr


def integral_raw(field, domain, y, radius, res=None):
    """``int g(f) det grad f / int g`` without any boundary checks."""
    y = np.asarray(y, dtype=float)
    total = 0.0
    for p, w in domain.iter_quadrature(res):
        v = field(p)
        g = bump(v, y, radius)
        live = g > 0.0
        if np.any(live):
            det, _ = det_adj(field.jacobian(p[live]))
            total += float(np.dot(w[live] * g[live], det))
    return total / bump_mass(domain.n, radius)


def _rounded(raw):
    value = int(np.rint(raw))
    residual = abs(raw - value)
    return value, residual, not residual < 0.5


def degree_by_integral(field, domain, y, bump_radius=0.1, res=None, mesh=None, bres=256):
    """Degree from ``int g(f(x)) det grad f(x) dx = deg * int g``."""
    y = np.asarray(y, dtype=float)
    mesh = _mesh_for(domain, mesh, bres)
    clr = _check_support(field, mesh, y, bump_radius)
    raw = integral_raw(field, domain, y, bump_radius, res)
    value, residual, bad = _rounded(raw)
    return DegreeReport(y, "integral", None if bad else value, raw, residual, [], bad,
                        {"bump_radius": bump_radius, "resolution": res or domain.resolution,
                         "clearance": clr})


# -- boundary pull-back ------------------------------------------------------
def newton_field(w, y, radius, cells=24):
    """``v(w) = |S^{n-1}|^{-1} int (w - z)/|w - z|^n g(z) dz`` by quadrature over the bump support.

    Returns ``(v, mass)`` where ``mass`` is the same quadrature of ``g``.
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    n = w.shape[1]
    off, wt = ball_template(n, cells)
    z = y + radius * off
    gz = bump(z, y, radius) * wt * radius ** n
    keep = gz > 0.0
    z, gz = z[keep], gz[keep]
    out = np.empty_like(w)
    step = max(1, (1 << 21) // len(z))
    for s in range(0, len(w), step):
        d = w[s:s + step, None, :] - z[None, :, :]
        r = np.linalg.norm(d, axis=2)
        out[s:s + step] = np.einsum("mqi,q->mi", d / r[..., None] ** n, gz)
    return out / _sphere_area(n), float(gz.sum())


def boundary_pullback_degree(field, domain, y, bump_radius=0.1, mesh=None, bres=256, cells=24):
    """Degree from the boundary integral of ``f^*(beta)``, ``d beta = g dw``.

    n=2: ``sum v1(m) dw2 - v2(m) dw1`` over image edges, midpoint ``m``.
    n=3: ``sum v(c) . (b - a) x (c - a) / 2`` over image triangles.
    """
    y = np.asarray(y, dtype=float)
    if domain.n not in (2, 3):
        raise ConfigurationError("the boundary route is implemented for n in {2, 3}")
    mesh = _mesh_for(domain, mesh, bres)
    vals = boundary_image(field, mesh)
    clr = _check_support(field, mesh, y, bump_radius, vals)
    im = vals[mesh.elements]
    if domain.n == 2:
        mid = 0.5 * (im[:, 0] + im[:, 1])
        dw = im[:, 1] - im[:, 0]
        v, mass = newton_field(mid, y, bump_radius, cells)
        flux = float(np.sum(v[:, 0] * dw[:, 1] - v[:, 1] * dw[:, 0]))
    else:
        cen = im.mean(axis=1)
        area = 0.5 * np.cross(im[:, 1] - im[:, 0], im[:, 2] - im[:, 0])
        v, mass = newton_field(cen, y, bump_radius, cells)
        flux = float(np.einsum("ij,ij->", v, area))
    raw = flux / mass
    value, residual, bad = _rounded(raw)
    return DegreeReport(y, "boundary", None if bad else value, raw, residual, [], bad,
                        {"bump_radius": bump_radius, "boundary_elements": len(mesh.elements),
                         "clearance": clr, "bump_cells": cells})


def winding_degree(field, domain, y, mesh=None, bres=256):
    """Degree from the boundary trace: winding number (n=2) or solid angle (n=3)."""
    y = np.asarray(y, dtype=float)
    mesh = _mesh_for(domain, mesh, bres)
    vals = boundary_image(field, mesh)
    if domain.n == 2:
        value = winding_number(vals[mesh.elements[:, 0]], y)
    else:
        value = int(solid_angle_degree(vals, mesh.elements, y[None, :])[0])
    return DegreeReport(y, "winding", value, float(value), 0.0, [], False,
                        {"boundary_elements": len(mesh.elements)})


def degree(field, domain, y, method="counting", **kw):
    """Dispatch to one method by name."""
    fn = {"counting": degree_by_counting, "integral": degree_by_integral,
          "boundary": boundary_pullback_degree, "winding": winding_degree}.get(method)
    if fn is None:
        raise ConfigurationError("unknown degree method %r" % method)
    return fn(field, domain, y, **kw)


# -- axioms ------------------------------------------------------------------
@dataclass
class AxiomReport:
    """Per-axiom outcomes; ``witnesses`` holds a counterexample for each failure."""

    checks: dict
    witnesses: dict

    @property
    def passed(self):
        return all(self.checks.values())


def _perturbed(field, domain, amp, direction, radius_frac=0.6):
    c = np.asarray(domain.center, dtype=float)
    R = radius_frac * float(-domain.signed_distance(c))
    e = np.asarray(direction, dtype=float)

    def val(x):
        return field(x) + amp * bump(x, c, R)[:, None] * e

    def grad(x):
        u = (x - c) / R
        s = (u * u).sum(1)
        q = np.where(s < 1.0, 1.0 - s, 1.0)
        g = np.where(s < 1.0, np.exp(-1.0 / q), 0.0)
        dg = (g * (-2.0 / q ** 2))[:, None] * u / R
        return field.jacobian(x) + amp * e[None, :, None] * dg[:, None, :]

    return MapField(val, field.n, field.m, grad, field.name + "+bump")


def degree_axiom_harness(field, domain, probes, injective=False, bres=256, margin=None,
                         path_samples=32, homotopy_amp=0.5):
    """Spot-check the degree axioms at the given probes.

    Checks: (i) nonzero degree implies a preimage; (ii) constancy along
    straight paths that keep clear of f(boundary); (iii) stability under a
    perturbation smaller than the clearance; (iv) invariance along the linear
    homotopy to a map with the same boundary values; (v) excision to a
    smaller concentric domain when no preimage lies in between; (vi) degree
    +-1 for injective maps at attained values.
    """
    mesh = boundary_mesh(domain, bres)
    vals = boundary_image(field, mesh)
    spacing = image_spacing(mesh, vals)
    margin = 2.0 * spacing if margin is None else margin
    probes = [np.asarray(p, dtype=float) for p in probes]
    usable, degs = [], []
    for p in probes:
        if image_clearance(field, mesh, p, vals) > margin:
            usable.append(p)
            degs.append(degree_by_counting(field, domain, p, mesh=mesh, margin=margin))
    checks = {k: True for k in ("attained", "constancy", "stability", "homotopy", "excision", "injective")}
    wit = {}
    direction = np.zeros(field.m)
    direction[0] = 1.0
    for p, r in zip(usable, degs):
        if r.value not in (None, 0) and not r.preimages:
            checks["attained"] = False
            wit["attained"] = p.tolist()
        clr = image_clearance(field, mesh, p, vals)
        # stability: any perturbation below the clearance keeps the degree
        g = _perturbed(field, domain, 0.25 * clr, direction)
        rg = degree_by_counting(g, domain, p, mesh=mesh, margin=0.5 * margin)
        if rg.value != r.value:
            checks["stability"] = False
            wit["stability"] = [p.tolist(), r.value, rg.value]
        # homotopy: g2 agrees with f on the boundary
        g2 = _perturbed(field, domain, homotopy_amp, direction)
        for t in (0.5, 1.0):
            ht = MapField(lambda x, t=t: (1 - t) * field(x) + t * g2(x), field.n, field.m,
                          lambda x, t=t: (1 - t) * field.jacobian(x) + t * g2.jacobian(x), "homotopy")
            rh = degree_by_counting(ht, domain, p, mesh=mesh, margin=margin)
            if rh.value != r.value:
                checks["homotopy"] = False
                wit["homotopy"] = [p.tolist(), t, r.value, rh.value]
        # excision onto the concentric domain shrunk by 10% of its feature size
        inner = inner_domain(domain, 0.1 * domain.min_feature)
        pts, _ = domain.quadrature()
        shell = pts[~inner.contains(pts)]
        if len(shell) and np.min(np.linalg.norm(field(shell) - p, axis=1)) > margin:
            ri = degree_by_counting(field, inner, p, margin=0.0, bres=bres)
            if ri.value != r.value:
                checks["excision"] = False
                wit["excision"] = [p.tolist(), r.value, ri.value]
        if injective and r.preimages and r.value not in (1, -1):
            checks["injective"] = False
            wit["injective"] = [p.tolist(), r.value]
    # constancy along straight segments between consecutive usable probes
    for a, b in zip(usable[:-1], usable[1:]):
        ts = np.linspace(0.0, 1.0, path_samples)
        path = a + ts[:, None] * (b - a)
        ordered = vals[mesh.elements[:, 0]]
        if domain.n == 2:
            clear = kernels.polyline_distance(ordered, path)
        else:
            clear = np.array([image_clearance(field, mesh, q, vals) for q in path])
        if np.all(clear > margin):
            if domain.n == 2:
                w = kernels.winding_numbers(ordered, path)
            else:
                w = solid_angle_degree(vals, mesh.elements, path)
            if np.any(w != w[0]):
                checks["constancy"] = False
                wit["constancy"] = [a.tolist(), b.tolist()]
    return AxiomReport(checks, wit)

