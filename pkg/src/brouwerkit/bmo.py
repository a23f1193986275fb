"""Mean oscillation, BMO/VMO estimates, mollification and the VMO degree.

Ball averages use one fixed quadrature template of the unit ball, scaled and
shifted per centre, so that averages at different centres and scales are
computed by the same rule.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.spatial import cKDTree

from .degree import bump_mass, integral_raw, solid_angle_degree
from .domain import ball_template, boundary_mesh, inner_domain
from .errors import (AdmissibilityError, ConfigurationError, DegenerateError, NoDegreeError,
                     SupportError, TubeError)
from .fields import MapField
from . import kernels

__all__ = [
    "SamplingPlan",
    "BmoProfile",
    "VmoTable",
    "EssentialRangeModel",
    "VmoDegreeReport",
    "CovResult",
    "ball_means",
    "mean_oscillation",
    "make_plan",
    "bmo_seminorm",
    "vmo_modulus",
    "mollifier_weights",
    "mollify",
    "average_field",
    "reflect_extend",
    "essential_range_distance",
    "boundary_ball_means",
    "vmo_degree",
    "vmo_change_of_variables_check",
    "null_kernel_average",
    "lemma_ab_sides",
    "default_schedule",
]

_BLOCK = 1 << 20


def _cells(n, cells):
    if cells is not None:
        return cells
    return 32 if n == 2 else 12


def ball_means(field, centers, eps, cells=None, domain=None, kernel=None, absdev_from=None):
    """Weighted means of ``field`` over ``B_eps(c)`` for many centres.

    Parameters
    ----------
    kernel : (Q,) array, optional
        Extra weights on the template nodes (a mollifier).
    absdev_from : (P, m) array or "mean", optional
        Also return the mean of ``|f - ref|`` with ``ref`` given per centre,
        or the ball mean itself.

    Returns
    -------
    means : (P, m)
    absdev : (P,) or None
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    n = centers.shape[1]
    off, w0 = ball_template(n, _cells(n, cells))
    w0 = w0 if kernel is None else w0 * kernel
    Q = len(off)
    P = len(centers)
    means = np.empty((P, field.m))
    dev = np.empty(P) if absdev_from is not None else None
    step = max(1, _BLOCK // Q)
    for s in range(0, P, step):
        c = centers[s:s + step]
        pts = c[:, None, :] + eps * off[None, :, :]
        vals = field(pts.reshape(-1, n)).reshape(len(c), Q, field.m)
        if domain is not None:
            w = w0[None, :] * domain.contains(pts.reshape(-1, n)).reshape(len(c), Q)
        else:
            w = np.broadcast_to(w0, (len(c), Q))
        tot = w.sum(axis=1)
        mu = np.einsum("pq,pqm->pm", w, vals) / tot[:, None]
        means[s:s + step] = mu
        if dev is not None:
            ref = mu if isinstance(absdev_from, str) else np.asarray(absdev_from)[s:s + step]
            dev[s:s + step] = np.einsum("pq,pq->p", w, np.linalg.norm(vals - ref[:, None, :], axis=2)) / tot
    return means, dev


def _admissible(domain, centers, eps):
    return -domain.signed_distance(np.atleast_2d(centers)) > eps


def mean_oscillation(field, center, eps, domain, cells=None):
    """``(1/|B|) int_B |f - f_B|`` over ``B = B_eps(x)`` with ``eps < dist(x, boundary)``."""
    c = np.asarray(center, dtype=float)
    if not _admissible(domain, c, eps)[0]:
        raise AdmissibilityError("eps = %g is not below dist(x, boundary)" % eps)
    _, dev = ball_means(field, c[None, :], eps, cells, absdev_from="mean")
    return float(dev[0])


@dataclass(frozen=True, eq=False)
class SamplingPlan:
    """Seeded jittered lattice of centres for each scale of a dyadic ladder."""

    seed: int
    scales: tuple
    centers: tuple
    lattice: int
    jitter: float

    @property
    def size(self):
        return int(sum(len(c) for c in self.centers))

    def record(self):
        return {"seed": self.seed, "scales": list(self.scales), "lattice": self.lattice,
                "jitter": self.jitter, "balls": [len(c) for c in self.centers]}


def _lattice(domain, m, jitter, rng):
    lo, hi = domain.bbox
    c = np.asarray(domain.center)
    spacing = (hi - lo) / m
    k = np.arange(m) - (m - 1) / 2.0
    grid = np.stack(np.meshgrid(*[c[i] + k * spacing[i] for i in range(domain.n)], indexing="ij"),
                    axis=-1).reshape(-1, domain.n)
    jit = rng.uniform(-jitter, jitter, size=grid.shape) * spacing
    anchor = np.all(np.abs(grid - c) < 1e-12 * (1 + np.abs(c)), axis=1)
    jit[anchor] = 0.0
    return grid + jit


def default_schedule(domain, levels=5, start=0.2):
    return [start * domain.min_feature * 0.5 ** k for k in range(levels)]


def make_plan(domain, scales=None, lattice=None, seed=0, jitter=0.1):
    """Dyadic scale ladder times a jittered, centre-anchored lattice of centres."""
    scales = tuple(float(s) for s in (scales if scales is not None
                                      else [0.4 * domain.min_feature * 0.5 ** k for k in range(4)]))
    m = lattice if lattice is not None else (11 if domain.n == 2 else 5)
    rng = np.random.default_rng(seed)
    cents = []
    for s in scales:
        pts = _lattice(domain, m, jitter, rng)
        cents.append(pts[_admissible(domain, pts, s)])
    return SamplingPlan(int(seed), scales, tuple(cents), m, float(jitter))


@dataclass(eq=False)
class BmoProfile:
    plan: SamplingPlan
    estimate: float
    table: dict
    values: list
    argmax: tuple

    def record(self):
        return {"estimate": self.estimate, "table": {repr(k): v for k, v in self.table.items()},
                "argmax": [list(self.argmax[0]), self.argmax[1]], "plan": self.plan.record()}


def bmo_seminorm(field, domain, plan=None, seed=0, cells=None, min_balls=100, min_scales=4):
    """Sup of mean oscillations over the plan's balls, with the per-scale table."""
    plan = make_plan(domain, seed=seed) if plan is None else plan
    if plan.size == 0:
        raise ConfigurationError("the sampling plan has no admissible balls")
    if plan.size < min_balls or len(plan.scales) < min_scales:
        raise ConfigurationError("plan needs >= %d balls over >= %d scales" % (min_balls, min_scales))
    best, arg = -1.0, None
    table, values = {}, []
    for s, cs in zip(plan.scales, plan.centers):
        if len(cs) == 0:
            table[s] = 0.0
            values.append(np.empty(0))
            continue
        _, dev = ball_means(field, cs, s, cells, absdev_from="mean")
        values.append(dev)
        table[s] = float(dev.max())
        if dev.max() > best:
            best = float(dev.max())
            arg = (cs[int(np.argmax(dev))].tolist(), s)
    return BmoProfile(plan, best, table, values, arg)


@dataclass(frozen=True)
class VmoTable:
    eps: tuple
    omega: tuple
    counts: tuple

    def inversions(self):
        """Number of scale steps where omega grows as eps shrinks."""
        return int(sum(b > a for a, b in zip(self.omega, self.omega[1:])))


def vmo_modulus(field, domain, eps_list, centers=None, seed=0, cells=None, lattice=None):
    """``omega(eps)``: max mean oscillation over admissible centres at each scale."""
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigurationError("eps list must be strictly descending")
    if centers is None:
        m = lattice if lattice is not None else (11 if domain.n == 2 else 5)
        centers = _lattice(domain, m, 0.1, np.random.default_rng(seed))
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    omega, counts = [], []
    for e in eps_list:
        cs = centers[_admissible(domain, centers, e)]
        if len(cs) == 0:
            raise AdmissibilityError("no admissible centre at eps = %g" % e)
        _, dev = ball_means(field, cs, e, cells, absdev_from="mean")
        omega.append(float(dev.max()))
        counts.append(len(cs))
    return VmoTable(tuple(eps_list), tuple(omega), tuple(counts))


# -- mollification and averages ------------------------------------------------
def mollifier_weights(n, cells=None):
    """``eta(u) = exp(-1/(1-|u|^2))`` on the unit-ball template, scaled to unit mass."""
    off, w = ball_template(n, _cells(n, cells))
    s = np.einsum("ij,ij->i", off, off)
    eta = np.where(s < 1.0, np.exp(-1.0 / np.where(s < 1.0, 1.0 - s, 1.0)), 0.0)
    return eta / float(np.dot(w, eta))


def reflect_extend(field, domain):
    """``f_T``: ``f`` inside the domain, ``f(2P(x) - x)`` in the tube."""

    def val(x):
        inside = domain.signed_distance(x) <= 0.0
        out = np.empty((len(x), field.m))
        if np.any(inside):
            out[inside] = field(x[inside])
        if not np.all(inside):
            out[~inside] = field(domain.reflect(x[~inside]))
        return out

    return MapField(val, field.n, field.m, None, field.name + "_T", float(np.min(domain.h)))


def mollify(field, domain, eps, cells=None):
    """``f_T * eta_eps`` evaluated by quadrature on the kernel support."""
    if not 0.0 < eps < domain.tube_width:
        raise TubeError("mollifier radius %g must lie below the tube width %g" % (eps, domain.tube_width))
    ext = reflect_extend(field, domain)
    n = field.n
    kern = mollifier_weights(n, cells)

    def val(x):
        # the template is symmetric, so f(x - eps u) and f(x + eps u) weigh alike
        means, _ = ball_means(ext, x, eps, cells, kernel=kern)
        return means

    return MapField(val, n, field.m, None, "%s*eta_%g" % (field.name, eps), float(np.min(domain.h)))


def average_field(field, eps, domain=None, cells=None):
    """``x -> mean of f over B_eps(x)`` (intersected with ``domain`` if given)."""

    def val(x):
        means, _ = ball_means(field, x, eps, cells, domain)
        return means

    h = float(np.min(domain.h)) if domain is not None else 1e-3 * eps
    return MapField(val, field.n, field.m, None, "avg_%g(%s)" % (eps, field.name), h)


def null_kernel_average(field, x, eps, cells=None):
    """``(1/|B|) int_B f(z) psi((x-z)/eps) dz`` with ``psi = 1 - |B_1| eta``."""
    n = field.n
    off, w = ball_template(n, _cells(n, cells))
    # the template volume (not the exact one) makes sum(w * psi) vanish exactly
    psi = 1.0 - w.sum() * mollifier_weights(n, cells)
    # psi can be negative, so weight by hand instead of via ball_means
    x = np.atleast_2d(np.asarray(x, dtype=float))
    pts = x[:, None, :] + eps * off[None, :, :]
    vals = field(pts.reshape(-1, n)).reshape(len(x), len(off), field.m)
    return np.einsum("q,pqm->pm", w * psi, vals) / w.sum()


def lemma_ab_sides(values, weights, subset):
    """``|g_A - g_B|`` and ``(mu(B)/mu(A)) * mean_B |g - g_B|`` for a subset ``A`` of ``B``."""
    g = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    a = np.asarray(subset, dtype=bool)
    muB, muA = w.sum(), w[a].sum()
    gB = np.dot(w, g) / muB
    gA = np.dot(w[a], g[a]) / muA
    rhs = (muB / muA) * np.dot(w, np.abs(g - gB)) / muB
    return float(abs(gA - gB)), float(rhs)


# -- essential range -------------------------------------------------------------
@dataclass(eq=False)
class EssentialRangeModel:
    """Boundary-trace values with their boundary measure.

    A value is essential when the trace measure within ``radius`` of it
    exceeds ``cutoff * total``.
    """

    values: np.ndarray
    weights: np.ndarray
    radius: float
    total: float = 0.0
    _mass: np.ndarray | None = dc_field(default=None, repr=False)

    def __post_init__(self):
        self.total = float(self.weights.sum())

    @classmethod
    def from_trace(cls, mesh, values, cutoff=1e-3):
        v = np.asarray(values, dtype=float)
        el = v[mesh.elements]
        k = mesh.n
        edges = np.concatenate([np.linalg.norm(el[:, (i + 1) % k] - el[:, i], axis=1) for i in range(k)])
        med = float(np.median(edges))
        # a continuous trace must keep more than the cutoff mass in each neighbourhood
        factor = max(4.0, (cutoff * len(v)) ** (1.0 / (k - 1)))
        return cls(v, mesh.vertex_weights.copy(), factor * max(med, 1e-300))

    @classmethod
    def from_field(cls, field, mesh, cutoff=1e-3):
        return cls.from_trace(mesh, field(mesh.vertices), cutoff)

    @property
    def mass(self):
        if self._mass is None:
            tree = cKDTree(self.values)
            nb = tree.query_ball_point(self.values, self.radius)
            self._mass = np.array([self.weights[i].sum() for i in nb])
        return self._mass

    def essential(self, cutoff=1e-3):
        return self.mass > cutoff * self.total


def essential_range_distance(model, p, cutoff=1e-3):
    """Distance from ``p`` to the essential values of the trace."""
    ess = model.essential(cutoff)
    if not np.any(ess):
        return float("inf")
    return float(np.min(np.linalg.norm(model.values[ess] - np.asarray(p, dtype=float), axis=1)))


# -- VMO degree ------------------------------------------------------------------
def boundary_ball_means(field, domain, eps, p, nballs=64, bres=256, cells=None):
    """Mean ``|f - p|`` over balls ``B_eps(c)`` with ``c`` on the boundary of the eps-inner domain."""
    mesh = boundary_mesh(inner_domain(domain, eps), bres)
    c = mesh.vertices[:: max(1, len(mesh.vertices) // nballs)]
    ref = np.broadcast_to(np.asarray(p, dtype=float), (len(c), field.m))
    _, dev = ball_means(field, c, eps, cells, absdev_from=ref)
    return dev


def _trace_degree(mesh, values, p):
    if mesh.n == 2:
        curve = values[mesh.elements[:, 0]]
        if np.min(np.linalg.norm(curve - p, axis=1)) <= 1e-12:
            raise DegenerateError("averaged trace passes through p")
        return int(kernels.winding_numbers(curve, p[None, :])[0])
    return int(solid_angle_degree(values, mesh.elements, p[None, :])[0])


@dataclass
class VmoDegreeReport:
    p: np.ndarray
    schedule: list
    degrees: list
    stabilized: int | None
    d0: float
    margin_floor: float
    persistence: list | None = None
    persistence_scales: list | None = None
    d1: float | None = None

    @property
    def persists(self):
        return self.persistence is not None and all(m > self.d1 for m in self.persistence)

    def record(self):
        return {"p": [float(v) for v in self.p], "schedule": list(self.schedule),
                "degrees": list(self.degrees), "stabilized": self.stabilized, "d0": self.d0,
                "margin_floor": self.margin_floor, "persistence": self.persistence,
                "persistence_scales": self.persistence_scales, "d1": self.d1}


def vmo_degree(field, domain, p, schedule=None, bres=256, cells=None, margin_floor=1e-3,
               nballs=32, persistence=True, persistence_cells=None, tail=3):
    """Degrees of the averaged maps on the inner domains along a schedule.

    The value is stabilized when the last ``tail`` entries agree.  The
    separation margin ``d0`` is the least mean ``|f - p|`` over the
    boundary-adjacent balls of all scales; below ``margin_floor`` no degree
    is defined.  With ``persistence`` the mollified maps are checked to keep
    margin ``d0/4`` on the same balls.
    """
    p = np.asarray(p, dtype=float)
    schedule = default_schedule(domain) if schedule is None else [float(e) for e in schedule]
    pc = persistence_cells if persistence_cells is not None else (16 if domain.n == 2 else 6)
    bc = cells if cells is not None else (24 if domain.n == 2 else 8)
    d0 = min(float(boundary_ball_means(field, domain, e, p, nballs, bres, bc).min()) for e in schedule)
    if not d0 > margin_floor:
        raise NoDegreeError("separation margin %.3g is below the floor %.3g" % (d0, margin_floor))
    degs = []
    for e in schedule:
        mesh = boundary_mesh(inner_domain(domain, e), bres)
        vals, _ = ball_means(field, mesh.vertices, e, bc)
        degs.append(_trace_degree(mesh, vals, p))
    stab = degs[-1] if len(degs) >= tail and len(set(degs[-tail:])) == 1 else None
    rep = VmoDegreeReport(p, schedule, degs, stab, d0, margin_floor)
    if persistence:
        kappas = [0.5 * domain.tube_width * 0.5 ** k for k in range(len(schedule))]
        margins = []
        for kap in kappas:
            fi = mollify(field, domain, kap, pc)
            margins.append(min(float(boundary_ball_means(fi, domain, e, p, nballs // 2, bres, pc).min())
                               for e in schedule))
        rep.persistence = margins
        rep.persistence_scales = kappas
        rep.d1 = d0 / 4.0
    return rep


@dataclass
class CovResult:
    lhs: float
    rhs: float
    residual: float
    degree: VmoDegreeReport
    clearance: float

    def record(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "residual": self.residual,
                "clearance": self.clearance, "degree": self.degree.record()}


def vmo_change_of_variables_check(field, domain, p, bump_radius=0.1, res=None, schedule=None,
                                  bres=256, cutoff=1e-3, persistence=False):
    """``int g(f) det grad f`` against ``deg * int g`` with the degree from the averaged maps."""
    p = np.asarray(p, dtype=float)
    mesh = boundary_mesh(domain, bres)
    model = EssentialRangeModel.from_field(field, mesh, cutoff)
    clr = essential_range_distance(model, p, cutoff)
    if not clr > bump_radius:
        raise SupportError("bump support B_%.3g(p) meets the essential range of the trace" % bump_radius)
    rep = vmo_degree(field, domain, p, schedule, bres, persistence=persistence)
    if rep.stabilized is None:
        raise NoDegreeError("the averaged degrees did not stabilize: %s" % rep.degrees)
    mass = bump_mass(domain.n, bump_radius)
    lhs = integral_raw(field, domain, p, bump_radius, res) * mass
    rhs = rep.stabilized * mass
    return CovResult(float(lhs), float(rhs), float(abs(lhs - rhs) / mass), rep, clr)
