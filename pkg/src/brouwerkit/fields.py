"""Maps, Jacobians, quadrature, Sobolev energies, sphere traces and averages.

A :class:`MapField` wraps a vectorized callable ``(N, n) -> (N, m)`` and an
optional exact gradient ``(N, n) -> (N, m, n)``.  Without one, gradients are
central differences.  :class:`GridField` is a map sampled on the vertex
lattice of a :class:`~brouwerkit.domain.Domain` and interpolated.

The gradient norm is Frobenius throughout.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .domain import Ball, BoundaryMesh, Domain, make_domain, region_points
from .errors import ConfigurationError, DomainError, MarginError

__all__ = [
    "MapField",
    "GridField",
    "JacobianSample",
    "SphereTrace",
    "CoareaResult",
    "BumpTestField",
    "det_adj",
    "gradient",
    "integrate",
    "sphere_trace",
    "sobolev_energy",
    "coarea_check",
    "lebesgue_average",
    "adjugate_identity_check",
    "sample_grid",
    "write_grid",
    "read_grid",
]

_CHUNK = 1 << 18


class MapField:
    """A map ``R^n -> R^m`` with vectorized evaluation.

    Parameters
    ----------
    value : callable
        ``(N, n) -> (N, m)``.
    n, m : int
    gradient : callable, optional
        ``(N, n) -> (N, m, n)`` exact gradient.
    name : str
    fd_step : float
        Central-difference step used when no exact gradient is given.
    """

    def __init__(self, value, n, m, gradient=None, name="map", fd_step=1e-4):
        self._value = value
        self._gradient = gradient
        self.n = int(n)
        self.m = int(m)
        self.name = name
        self.fd_step = float(fd_step)

    def __repr__(self):
        return "%s(%r, n=%d, m=%d)" % (type(self).__name__, self.name, self.n, self.m)

    @property
    def has_exact_gradient(self):
        return self._gradient is not None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.n)
        out = np.asarray(self._value(flat), dtype=float).reshape(len(flat), self.m)
        return out.reshape(x.shape[:-1] + (self.m,))

    def jacobian(self, x, h=None):
        """Gradient ``(..., m, n)``: exact if available, else central differences."""
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.n)
        if self._gradient is not None and h is None:
            J = np.asarray(self._gradient(flat), dtype=float).reshape(len(flat), self.m, self.n)
        else:
            J = self.fd_jacobian(flat, self.fd_step if h is None else h)
        return J.reshape(x.shape[:-1] + (self.m, self.n))

    def fd_jacobian(self, x, h):
        x = np.asarray(x, dtype=float).reshape(-1, self.n)
        J = np.empty((len(x), self.m, self.n))
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = h
            J[:, :, j] = (self(x + e) - self(x - e)) / (2.0 * h)
        return J


class GridField(MapField):
    """Map sampled on the ``(res+1)^n`` vertex lattice of a domain's bounding box.

    ``order`` is 1 (multilinear) or 3 (cubic).  Finite-difference steps
    default to the cell size.
    """

    def __init__(self, domain, samples, order=1, name="grid"):
        if order not in (1, 3):
            raise ConfigurationError("interpolation order must be 1 or 3")
        samples = np.asarray(samples, dtype=float)
        shape = (domain.resolution + 1,) * domain.n
        if samples.ndim != 2 or samples.shape[0] != int(np.prod(shape)):
            raise ConfigurationError("expected %d samples, got %s" % (int(np.prod(shape)), samples.shape))
        self.domain = domain
        self.samples = samples
        self.order = order
        m = samples.shape[1]
        self._interp = RegularGridInterpolator(
            domain.vertex_axes(), samples.reshape(shape + (m,)),
            method="linear" if order == 1 else "cubic", bounds_error=False, fill_value=None)
        super().__init__(self._interp, domain.n, m, None, name, float(np.min(domain.h)))


@dataclass(frozen=True)
class JacobianSample:
    point: np.ndarray
    grad: np.ndarray
    det: float | None
    adj: np.ndarray | None


def det_adj(J):
    """Determinant and adjugate of square matrices ``(..., n, n)``."""
    J = np.asarray(J, dtype=float)
    n = J.shape[-1]
    if n == 2:
        a, b, c, d = J[..., 0, 0], J[..., 0, 1], J[..., 1, 0], J[..., 1, 1]
        adj = np.stack([np.stack([d, -b], -1), np.stack([-c, a], -1)], -2)
        return a * d - b * c, adj
    if n == 3:
        r0, r1, r2 = J[..., 0, :], J[..., 1, :], J[..., 2, :]
        # columns of the adjugate are cross products of rows
        adj = np.stack([np.cross(r1, r2), np.cross(r2, r0), np.cross(r0, r1)], axis=-1)
        det = np.einsum("...i,...i->...", r0, adj[..., :, 0])
        return det, adj
    det = np.linalg.det(J)
    adj = np.empty_like(J)
    idx = np.arange(n)
    for i in range(n):
        for j in range(n):
            minor = J[..., idx != i, :][..., :, idx != j]
            adj[..., j, i] = (-1) ** (i + j) * np.linalg.det(minor)
    return det, adj


def gradient(field, point, h=None, domain=None):
    """Jacobian sample at one point.

    With ``domain`` given (or for grid fields) the point must clear the
    boundary by the stencil step.
    """
    x = np.asarray(point, dtype=float)
    dom = domain if domain is not None else getattr(field, "domain", None)
    step = field.fd_step if h is None else h
    if dom is not None and not float(-dom.signed_distance(x)) >= step:
        raise MarginError("point %s is within %g of the boundary" % (x.tolist(), step))
    J = field.jacobian(x[None, :], h)[0]
    if field.m == field.n:
        det, adj = det_adj(J)
        return JacobianSample(x, J, float(det), adj)
    return JacobianSample(x, J, None, None)


def _values(field, pts):
    v = np.asarray(field(pts), dtype=float)
    return v


def integrate(field, region, res=None):
    """Midpoint quadrature of a scalar or vector integrand.

    ``region`` is a Domain, Ball, Annulus or BoundaryMesh (element
    centroids).  ``field`` maps ``(N, n)`` points to ``(N,)`` or ``(N, k)``.
    """
    if isinstance(region, BoundaryMesh):
        v = _values(field, region.centroids)
        return np.tensordot(region.measures, v, axes=(0, 0))
    total = None
    for p, w in region_points(region, res):
        for s in range(0, len(p), _CHUNK):
            part = np.tensordot(w[s:s + _CHUNK], _values(field, p[s:s + _CHUNK]), axes=(0, 0))
            total = part if total is None else total + part
    return total


@dataclass(frozen=True, eq=False)
class SphereTrace:
    """Values of a map on a sphere mesh and the tangential differential norm per element."""

    center: np.ndarray
    radius: float
    mesh: BoundaryMesh
    values: np.ndarray
    df: np.ndarray

    @property
    def oscillation(self):
        from .kernels import farthest_pair
        d2, _, _ = farthest_pair(self.values, np.ones(len(self.values), dtype=bool))
        return float(np.sqrt(d2))

    def energy(self, p):
        """``int_S |df|^p dsigma``."""
        return float(np.dot(self.mesh.measures, self.df ** p))


def _tangential_df(mesh, values):
    v = mesh.vertices[mesh.elements]
    fv = values[mesh.elements]
    if mesh.n == 2:
        return np.linalg.norm(fv[:, 1] - fv[:, 0], axis=1) / np.linalg.norm(v[:, 1] - v[:, 0], axis=1)
    T = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
    F = np.stack([fv[:, 1] - fv[:, 0], fv[:, 2] - fv[:, 0]], axis=-1)
    G = np.einsum("eki,ekj->eij", T, T)
    D = F @ np.linalg.inv(G) @ np.swapaxes(T, 1, 2)
    return np.linalg.norm(D, axis=(1, 2))


def sphere_trace(field, mesh, center=None, radius=None):
    """Pointwise restriction of ``field`` to a sphere mesh.

    The differential of the piecewise-linear trace is taken on each element.
    """
    vals = field(mesh.vertices)
    if center is None:
        center = mesh.vertices.mean(axis=0)
    if radius is None:
        radius = float(np.mean(np.linalg.norm(mesh.vertices - center, axis=1)))
    return SphereTrace(np.asarray(center, dtype=float), float(radius), mesh, vals, _tangential_df(mesh, vals))


def sobolev_energy(field, region, p=None, res=None):
    """``int |grad f|_F^p`` over a Domain, Ball or Annulus (default ``p = n``)."""
    p = field.n if p is None else p
    if p < 1:
        raise ConfigurationError("exponent must be >= 1")
    return float(integrate(lambda x: np.linalg.norm(field.jacobian(x), axis=(-2, -1)) ** p, region, res))


@dataclass(frozen=True)
class CoareaResult:
    lhs: float
    rhs: float
    holds: bool


def coarea_check(field, center, radius, radial_samples=32, sphere_res=256, domain=None,
                 cells=64, slack=1.05):
    """Compare ``int_0^r int_{S_rho} |df_rho|^n`` with ``int_{B_r} |grad f|^n``."""
    from .domain import sphere_mesh

    c = np.asarray(center, dtype=float)
    n = field.n
    if domain is not None:
        sphere_mesh(c, radius, 16, domain)
    drho = radius / radial_samples
    lhs = 0.0
    for k in range(radial_samples):
        rho = (k + 0.5) * drho
        tr = sphere_trace(field, sphere_mesh(c, rho, sphere_res), c, rho)
        lhs += drho * tr.energy(n)
    rhs = sobolev_energy(field, Ball(tuple(c), radius), n, cells)
    return CoareaResult(lhs, rhs, bool(lhs <= rhs * slack))


def lebesgue_average(field, x, rho, domain=None, cells=32):
    """Mean of ``field`` over ``B_rho(x)`` intersected with ``domain``."""
    p, w = Ball(tuple(np.asarray(x, dtype=float)), rho, domain).quadrature(cells)
    if w.sum() <= 0.0:
        raise DomainError("ball B_%g(%s) misses the domain" % (rho, np.asarray(x).tolist()))
    return np.tensordot(w, field(p), axes=(0, 0)) / w.sum()


class BumpTestField:
    """Smooth vector field ``eta^k = phi(u) (c_k + B_kj u_j)``, ``u = (x - x0)/R``.

    ``phi(u) = exp(-1/(1 - |u|^2))`` inside the unit ball; compactly
    supported in ``B_R(x0)``.
    """

    def __init__(self, center, radius, coef=None, mat=None):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        n = self.center.size
        self.coef = np.ones(n) if coef is None else np.asarray(coef, dtype=float)
        self.mat = 0.5 * np.eye(n)[::-1] if mat is None else np.asarray(mat, dtype=float)

    @classmethod
    def seeded(cls, center, radius, seed=0):
        rng = np.random.default_rng(seed)
        n = np.asarray(center).size
        return cls(center, radius, rng.normal(size=n), rng.normal(size=(n, n)))

    def _phi(self, x):
        u = (x - self.center) / self.radius
        s = np.einsum("...i,...i->...", u, u)
        inside = s < 1.0
        q = np.where(inside, 1.0 - s, 1.0)
        phi = np.where(inside, np.exp(-1.0 / q), 0.0)
        dphi = np.where(inside, phi * (-2.0 / q ** 2), 0.0)[..., None] * u / self.radius
        return u, phi, dphi

    def __call__(self, x):
        u, phi, _ = self._phi(np.asarray(x, dtype=float))
        return phi[..., None] * (self.coef + u @ self.mat.T)

    def grad(self, x):
        """``(..., n, n)`` with entry ``[k, j] = d eta^k / d x_j``."""
        u, phi, dphi = self._phi(np.asarray(x, dtype=float))
        poly = self.coef + u @ self.mat.T
        return poly[..., :, None] * dphi[..., None, :] + phi[..., None, None] * self.mat / self.radius


def adjugate_identity_check(field, domain, eta=None, res=None):
    """``|int d_j eta^k (adj grad f)^j_k dx|`` for a compactly supported ``eta``.

    The default ``eta`` is a bump field centred in the domain with radius
    0.8 times the distance to the boundary.
    """
    if field.m != field.n:
        raise ConfigurationError("adjugate identity needs a square Jacobian")
    if eta is None:
        c = np.asarray(domain.center)
        eta = BumpTestField(c, 0.8 * float(-domain.signed_distance(c)))

    def integrand(x):
        out = np.zeros(len(x))
        live = np.linalg.norm(x - eta.center, axis=1) < eta.radius
        if np.any(live):
            xl = x[live]
            _, adj = det_adj(field.jacobian(xl))
            out[live] = np.einsum("nkj,njk->n", eta.grad(xl), adj)
        return out

    return abs(float(integrate(integrand, domain, res)))


# -- grid fields and their file format ---------------------------------------
def sample_grid(field, domain, order=1, name=None):
    """Sample ``field`` on the vertex lattice of ``domain`` (bounding box)."""
    axes = domain.vertex_axes()
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.n)
    return GridField(domain, field(pts), order, name or field.name)


def _domain_header(d):
    return {"kind": d.kind, "lo": list(d.lo), "hi": list(d.hi), "center": list(d.center),
            "radius": d.radius, "resolution": d.resolution, "tube_fraction": d.tube_fraction}


def _domain_from_header(h):
    if h["kind"] == "ball":
        extent = (h["center"], h["radius"])
    else:
        extent = (h["lo"], h["hi"])
    return make_domain(h["kind"], extent, h["resolution"], h.get("tube_fraction", 0.1))


def write_grid(field, path):
    """Write a GridField: one JSON header line, then CSV rows of samples.

    Floats use ``repr`` so reading back is bit-exact.
    """
    header = {"name": field.name, "n": field.n, "m": field.m,
              "domain": _domain_header(field.domain), "resolution": field.domain.resolution,
              "order": field.order}
    buf = io.StringIO()
    buf.write(json.dumps(header, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["f%d" % i for i in range(field.m)])
    for row in field.samples:
        w.writerow([repr(float(v)) for v in row])
    with open(path, "w", encoding="ascii") as fh:
        fh.write(buf.getvalue())


def read_grid(path):
    with open(path, encoding="ascii") as fh:
        header = json.loads(fh.readline())
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, header["m"])
    return GridField(_domain_from_header(header["domain"]), data, header["order"], header["name"])
