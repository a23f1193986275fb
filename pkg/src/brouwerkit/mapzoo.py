"""Analytic preset maps, constructed fixtures, surfaces and energy functionals.

Every preset returns a :class:`ZooEntry` whose declared properties carry a
provenance note; the test suite reads them as oracles.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigurationError, DegenerateError
from .fields import MapField, det_adj, integrate

__all__ = [
    "ZooEntry",
    "SurfaceMap",
    "EnergySpec",
    "EnergyResult",
    "ImmersionResult",
    "CATALOGUE",
    "preset",
    "parse_map_spec",
    "surface",
    "normal_field",
    "tilde_F",
    "tilde_domain",
    "elastic_energy",
    "immersion_energy",
    "closest_rotation",
]

_PUNCTURE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ZooEntry:
    """A preset map with declared properties and their provenance.

    ``props`` keys: ``det_sign`` in {"+", "-", "0", "mixed"}, ``injective``,
    ``w1n`` (in W^{1,n} on bounded sets), ``smooth``, ``bounded_on_disk``
    (sup of |f| on the closed unit disk or None), ``fixture``.
    """

    name: str
    params: dict
    field: MapField
    props: dict
    provenance: dict = dc_field(default_factory=dict)

    def record(self):
        return {"name": self.name, "params": {k: _jsonable(v) for k, v in self.params.items()},
                "n": self.field.n, "m": self.field.m,
                "properties": {k: _jsonable(v) for k, v in self.props.items()},
                "provenance": dict(self.provenance)}


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _bump(s):
    """``exp(1 - 1/(1 - s^2))`` for s < 1, peak 1 at s = 0; and its derivative."""
    inside = s < 1.0
    q = np.where(inside, 1.0 - s * s, 1.0)
    b = np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)
    db = np.where(inside, b * (-2.0 * s / q ** 2), 0.0)
    return b, db


# -- individual presets ------------------------------------------------------
def _identity(n=2):
    f = MapField(lambda x: x.copy(), n, n,
                 lambda x: np.broadcast_to(np.eye(n), (len(x), n, n)).copy(), "identity")
    return f, {"det_sign": "+", "injective": True, "w1n": True, "smooth": True,
               "bounded_on_disk": 1.0}, {"det_sign": "TRIVIAL: det I = 1"}


def _translate(v=(2.0, 0.0)):
    v = np.asarray(v, dtype=float)
    n = v.size
    f = MapField(lambda x: x + v, n, n,
                 lambda x: np.broadcast_to(np.eye(n), (len(x), n, n)).copy(), "translate")
    return f, {"det_sign": "+", "injective": True, "w1n": True, "smooth": True,
               "bounded_on_disk": 1.0 + float(np.linalg.norm(v))}, {"det_sign": "TRIVIAL: det I = 1"}


def _linear(A=((1.0, 0.0), (0.0, -1.0))):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        k = int(round(np.sqrt(A.size)))
        A = A.reshape(k, k)
    n = A.shape[0]
    d = float(np.linalg.det(A))
    sign = "+" if d > 0 else ("-" if d < 0 else "0")
    f = MapField(lambda x: x @ A.T, n, n, lambda x: np.broadcast_to(A, (len(x), n, n)).copy(), "linear")
    return f, {"det_sign": sign, "injective": d != 0.0, "w1n": True, "smooth": True,
               "bounded_on_disk": float(np.linalg.norm(A, 2))}, {"det_sign": "TRIVIAL: constant det %r" % d}


def _rotation(theta=np.pi / 3):
    c, s = np.cos(theta), np.sin(theta)
    f, p, _ = _linear(((c, -s), (s, c)))
    f.name = "rotation"
    return f, p, {"det_sign": "TRIVIAL: det R = 1", "injective": "TRIVIAL: rotation"}


def _zpow(k=2):
    k = int(k)
    if k < 1:
        raise ConfigurationError("zpow needs k >= 1")

    def val(x):
        z = (x[:, 0] + 1j * x[:, 1]) ** k
        return np.stack([z.real, z.imag], axis=1)

    def grad(x):
        d = k * (x[:, 0] + 1j * x[:, 1]) ** (k - 1)
        a, b = d.real, d.imag
        return np.stack([np.stack([a, -b], -1), np.stack([b, a], -1)], -2)

    return MapField(val, 2, 2, grad, "zpow:%d" % k), {
        "det_sign": "+", "injective": k == 1, "w1n": True, "smooth": True, "bounded_on_disk": 1.0,
    }, {"det_sign": "DERIVED: det = |k z^(k-1)|^2 >= 0, zero only at the origin for k > 1"}


def _polar(x):
    r = np.linalg.norm(x, axis=1)
    ok = r > _PUNCTURE_TOL
    rs = np.where(ok, r, 1.0)
    u = x / rs[:, None]
    return r, ok, rs, u


def _winding_boundary(k=2):
    k = int(k)

    def val(x):
        r, ok, rs, u = _polar(x)
        t = np.arctan2(x[:, 1], x[:, 0])
        return np.where(ok[:, None], r[:, None] * np.stack([np.cos(k * t), np.sin(k * t)], axis=1), 0.0)

    def grad(x):
        r, ok, rs, u = _polar(x)
        t = np.arctan2(x[:, 1], x[:, 0])
        er = np.stack([np.cos(k * t), np.sin(k * t)], 1)
        et = k * np.stack([-np.sin(k * t), np.cos(k * t)], 1)
        perp = np.stack([-u[:, 1], u[:, 0]], 1)
        J = er[:, :, None] * u[:, None, :] + et[:, :, None] * perp[:, None, :]
        return np.where(ok[:, None, None], J, 0.0)

    sign = "+" if k > 0 else ("-" if k < 0 else "0")
    return MapField(val, 2, 2, grad, "winding_boundary:%d" % k), {
        "det_sign": sign, "injective": abs(k) == 1, "w1n": True, "smooth": abs(k) == 1,
        "bounded_on_disk": 1.0,
    }, {"det_sign": "DERIVED: polar form r e^{ik theta} has det = k", "w1n": "DERIVED: Lipschitz"}


def _angle(puncture=(1.0, 0.0)):
    pv = np.asarray(puncture, dtype=float)

    def val(x):
        r, ok, rs, u = _polar(x)
        return np.where(ok[:, None], u, pv)

    def grad(x):
        r, ok, rs, u = _polar(x)
        J = (np.eye(2) - u[:, :, None] * u[:, None, :]) / rs[:, None, None]
        return np.where(ok[:, None, None], J, 0.0)

    return MapField(val, 2, 2, grad, "angle"), {
        "det_sign": "0", "injective": False, "w1n": False, "smooth": False, "bounded_on_disk": 1.0,
        "suspect_points": [(0.0, 0.0)],
    }, {"det_sign": "TRIVIAL: rank one gradient", "w1n": "DERIVED: |grad|^2 = 1/r^2 not integrable at 0",
        "suspect_points": "DERIVED: eosc on balls about 0 equals 2"}


def _cavitation(puncture=(1.0, 0.0)):
    pv = np.asarray(puncture, dtype=float)

    def val(x):
        r, ok, rs, u = _polar(x)
        return np.where(ok[:, None], (1.0 + r)[:, None] * u, pv)

    def grad(x):
        r, ok, rs, u = _polar(x)
        P = u[:, :, None] * u[:, None, :]
        J = P + ((1.0 + rs) / rs)[:, None, None] * (np.eye(2) - P)
        return np.where(ok[:, None, None], J, 0.0)

    return MapField(val, 2, 2, grad, "cavitation"), {
        "det_sign": "+", "injective": True, "w1n": False, "smooth": False, "bounded_on_disk": 2.0,
        "suspect_points": [(0.0, 0.0)],
    }, {"det_sign": "DERIVED: det = (1+r)/r", "w1n": "DERIVED: |grad|^2 = 1 + (1+r)^2/r^2",
        "suspect_points": "DERIVED: opens a hole of radius 1 at the origin"}


def _diffeo1(amp=0.15):
    a = float(amp)
    if not abs(a) < 0.25:
        raise ConfigurationError("diffeo1 amplitude must be below 0.25 for injectivity")

    def val(x):
        return np.stack([x[:, 0] + a * np.sin(2 * x[:, 1]), x[:, 1] + a * np.sin(2 * x[:, 0])], axis=1)

    def grad(x):
        one = np.ones(len(x))
        return np.stack([np.stack([one, 2 * a * np.cos(2 * x[:, 1])], -1),
                         np.stack([2 * a * np.cos(2 * x[:, 0]), one], -1)], -2)

    return MapField(val, 2, 2, grad, "diffeo1"), {
        "det_sign": "+", "injective": True, "w1n": True, "smooth": True,
        "bounded_on_disk": 1.0 + a * float(np.sin(2.0)) * 2 ** 0.5,
    }, {"det_sign": "DERIVED: det = 1 - 4a^2 cos2x cos2y >= 1 - 4a^2",
        "injective": "DERIVED: identity plus a 2|a|-Lipschitz perturbation"}


def _fold(s=0.1):
    s = float(s)

    def val(x):
        return np.stack([x[:, 0], np.sqrt(x[:, 1] ** 2 + s * s) - s], axis=1)

    def grad(x):
        z = np.zeros(len(x))
        return np.stack([np.stack([np.ones(len(x)), z], -1),
                         np.stack([z, x[:, 1] / np.sqrt(x[:, 1] ** 2 + s * s)], -1)], -2)

    return MapField(val, 2, 2, grad, "fold"), {
        "det_sign": "mixed", "injective": False, "w1n": True, "smooth": True,
        "bounded_on_disk": float(np.hypot(1.0, 0.0)),
    }, {"det_sign": "DERIVED: det = y / sqrt(y^2 + s^2) changes sign across y = 0"}


def _spike(center=(0.0, 0.0), height=10.0, width=1e-9):
    c = np.asarray(center, dtype=float)
    hgt = float(height)
    w = float(width)

    def val(x):
        out = x.copy()
        hit = np.linalg.norm(x - c, axis=1) <= w
        out[hit, 0] += hgt
        return out

    n = c.size
    return MapField(val, n, n, lambda x: np.broadcast_to(np.eye(n), (len(x), n, n)).copy(), "spike"), {
        "det_sign": "+", "injective": True, "w1n": True, "smooth": False, "fixture": True,
        "bounded_on_disk": None,
    }, {"det_sign": "TRIVIAL: identity off a null set", "fixture": "DERIVED: one-sample spike of the given height"}


def _bubble(center=(0.3, 0.0), height=3.0, width=0.15):
    c = np.asarray(center, dtype=float)
    hgt, w = float(height), float(width)

    def val(x):
        b, _ = _bump(np.linalg.norm(x - c, axis=1) / w)
        out = x.copy()
        out[:, 0] += hgt * b
        return out

    def grad(x):
        d = x - c
        s = np.linalg.norm(d, axis=1)
        _, db = _bump(s / w)
        ss = np.where(s > 0, s, 1.0)
        J = np.broadcast_to(np.eye(2), (len(x), 2, 2)).copy()
        J[:, 0, :] += (hgt * db / (w * ss))[:, None] * d
        return J

    return MapField(val, 2, 2, grad, "bubble"), {
        "det_sign": "mixed", "injective": False, "w1n": True, "smooth": True, "fixture": True,
        "bounded_on_disk": None,
    }, {"det_sign": "DERIVED: the steep bump slope drives d f1/d x1 negative on one side",
        "fixture": "DERIVED: pushes an interior blob past the image of the unit circle"}


def _constant(c=(0.5, -0.25)):
    c = np.asarray(c, dtype=float)
    n = c.size
    return MapField(lambda x: np.broadcast_to(c, (len(x), n)).copy(), n, n,
                    lambda x: np.zeros((len(x), n, n)), "constant"), {
        "det_sign": "0", "injective": False, "w1n": True, "smooth": True,
        "bounded_on_disk": float(np.linalg.norm(c)),
    }, {"det_sign": "TRIVIAL: zero gradient"}


CATALOGUE = {
    "identity": _identity,
    "translate": _translate,
    "linear": _linear,
    "rotation": _rotation,
    "zpow": _zpow,
    "winding_boundary": _winding_boundary,
    "angle": _angle,
    "cavitation": _cavitation,
    "diffeo1": _diffeo1,
    "fold": _fold,
    "spike": _spike,
    "bubble": _bubble,
    "constant": _constant,
}

# positional parameter names for the "name:a,b,c" shorthand
_POSITIONAL = {
    "translate": ("v", True),
    "linear": ("A", True),
    "rotation": ("theta", False),
    "zpow": ("k", False),
    "winding_boundary": ("k", False),
    "diffeo1": ("amp", False),
    "fold": ("s", False),
    "constant": ("c", True),
    "identity": ("n", False),
}


def preset(name, **params):
    """Catalogue entry ``name`` with keyword parameters."""
    if name not in CATALOGUE:
        raise ConfigurationError("unknown preset %r; known: %s" % (name, ", ".join(sorted(CATALOGUE))))
    field, props, prov = CATALOGUE[name](**params)
    prov = dict(prov)
    prov.setdefault("injective", "TRIVIAL" if props.get("injective") else "DERIVED: not injective")
    return ZooEntry(name, dict(params), field, props, prov)


def parse_map_spec(spec):
    """``"zpow:2"``, ``"rotation:1.047"``, ``"linear:1,0,0,-1"`` -> ZooEntry."""
    name, _, arg = spec.partition(":")
    if not arg:
        return preset(name)
    if name not in _POSITIONAL:
        raise ConfigurationError("preset %r takes no shorthand parameters" % name)
    key, vector = _POSITIONAL[name]
    try:
        vals = [float(v) for v in arg.split(",")]
    except ValueError as exc:
        raise ConfigurationError("bad parameters in %r" % spec) from exc
    if vector:
        return preset(name, **{key: tuple(vals)})
    v = vals[0]
    return preset(name, **{key: int(v) if key in ("k", "n") else v})


# -- surfaces ----------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class SurfaceMap:
    """A map ``R^2 -> R^3`` with its unit normal and the normal's gradient."""

    name: str
    field: MapField
    normal: object
    normal_grad: object


def _cross_normal(J):
    nrm = np.cross(J[:, :, 0], J[:, :, 1])
    return nrm, np.linalg.norm(nrm, axis=1)


def _fd_normal_grad(normal, h=1e-5):
    def grad(x):
        out = np.empty((len(x), 3, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            out[:, :, j] = (normal(x + e) - normal(x - e)) / (2 * h)
        return out
    return grad


def surface(name, **params):
    """Surface presets: ``flat`` (``swap``), ``stretched`` (``lam``), ``paraboloid``, ``hemisphere``."""
    if name == "flat":
        swap = bool(params.get("swap", False))

        def val(x):
            z = np.zeros(len(x))
            return np.stack([x[:, 1], x[:, 0], z] if swap else [x[:, 0], x[:, 1], z], axis=1)

        E = np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]]) if swap else np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        g = lambda x: np.broadcast_to(E, (len(x), 3, 2)).copy()
    elif name == "stretched":
        lam = float(params.get("lam", 2.0))
        val = lambda x: np.stack([lam * x[:, 0], lam * x[:, 1], np.zeros(len(x))], axis=1)
        E = np.array([[lam, 0.0], [0.0, lam], [0.0, 0.0]])
        g = lambda x: np.broadcast_to(E, (len(x), 3, 2)).copy()
    elif name == "paraboloid":
        val = lambda x: np.stack([x[:, 0], x[:, 1], x[:, 0] ** 2 + x[:, 1] ** 2], axis=1)

        def g(x):
            o, z = np.ones(len(x)), np.zeros(len(x))
            return np.stack([np.stack([o, z], -1), np.stack([z, o], -1),
                             np.stack([2 * x[:, 0], 2 * x[:, 1]], -1)], -2)
    elif name == "hemisphere":
        def val(x):
            return np.stack([x[:, 0], x[:, 1], np.sqrt(np.maximum(1.0 - (x ** 2).sum(1), 0.0))], axis=1)

        def g(x):
            zc = np.sqrt(np.maximum(1.0 - (x ** 2).sum(1), 1e-300))
            o, z = np.ones(len(x)), np.zeros(len(x))
            return np.stack([np.stack([o, z], -1), np.stack([z, o], -1),
                             np.stack([-x[:, 0] / zc, -x[:, 1] / zc], -1)], -2)
    else:
        raise ConfigurationError("unknown surface %r" % name)
    fld = MapField(val, 2, 3, g, name)
    nf = normal_field(fld, check=False)
    return SurfaceMap(name, fld, nf, _fd_normal_grad(nf))


def normal_field(field, probes=None, check=True, rank_tol=1e-12):
    """Unit normal ``d1 f x d2 f / |...|`` of a surface ``R^2 -> R^3``.

    With ``probes`` given, raises :class:`DegenerateError` if the gradient is
    rank deficient at any of them.
    """
    if field.n != 2 or field.m != 3:
        raise ConfigurationError("normal fields need a map R^2 -> R^3")
    if check and probes is not None:
        _, nn = _cross_normal(field.jacobian(np.asarray(probes, dtype=float).reshape(-1, 2)))
        if np.any(nn <= rank_tol):
            raise DegenerateError("surface gradient is rank deficient at a probe")

    def normal(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 2)
        v, nn = _cross_normal(field.jacobian(flat))
        return (v / np.where(nn > 0, nn, 1.0)[:, None]).reshape(x.shape[:-1] + (3,))

    return normal


def tilde_F(surf, d):
    """``F(x, t) = f(x) + t nu(x)`` on ``Omega x (-d, d)`` with the block gradient."""
    if not 0.0 < d < 1.0:
        raise ConfigurationError("half-thickness must lie in (0, 1)")
    f, nu, dnu = surf.field, surf.normal, surf.normal_grad

    def val(y):
        x, t = y[:, :2], y[:, 2:3]
        return f(x) + t * nu(x)

    def grad(y):
        x, t = y[:, :2], y[:, 2]
        top = f.jacobian(x) + t[:, None, None] * dnu(x)
        return np.concatenate([top, nu(x)[:, :, None]], axis=2)

    return MapField(val, 3, 3, grad, "tilde:%s" % surf.name)


def tilde_domain(lo, hi, d, resolution):
    """The box ``[lo, hi] x (-d, d)`` as a Domain."""
    from .domain import make_domain
    lo = list(np.asarray(lo, dtype=float)) + [-d]
    hi = list(np.asarray(hi, dtype=float)) + [d]
    return make_domain("box", (lo, hi), resolution)


# -- energies ----------------------------------------------------------------
@dataclass(frozen=True)
class EnergySpec:
    """``theta`` is ``"log"`` (barrier -log t, infinite for t <= 0) or ``"none"``."""

    theta: str = "none"
    n: int | None = None


@dataclass(frozen=True)
class EnergyResult:
    value: float
    infinite: bool
    dist_term: float
    theta_term: float

    def record(self):
        return {"value": None if self.infinite else self.value, "infinite": self.infinite,
                "dist_term": self.dist_term, "theta_term": None if self.infinite else self.theta_term}


def closest_rotation(J):
    """Nearest rotation to each square matrix (SVD with a det-sign correction)."""
    U, s, Vt = np.linalg.svd(J)
    d = np.sign(np.linalg.det(U @ Vt))
    d = np.where(d == 0, 1.0, d)
    D = np.ones(s.shape)
    D[..., -1] = d
    return (U * D[..., None, :]) @ Vt


def elastic_energy(field, domain, spec=EnergySpec(), res=None):
    """``int dist^n(grad f, SO(n)) + Theta(det grad f)``.

    ``dist^n`` means ``(dist^2)^(n/2)``.  Under the log barrier any quadrature
    node with ``det <= 0`` sets the infinite flag.
    """
    if field.m != field.n:
        raise ConfigurationError("elastic energy needs a square Jacobian")
    n = field.n if spec.n is None else spec.n
    state = {"bad": False}

    def integrand(x):
        J = field.jacobian(x)
        R = closest_rotation(J)
        dist2 = ((J - R) ** 2).sum(axis=(1, 2))
        out = np.empty((len(x), 2))
        out[:, 0] = dist2 ** (n / 2.0)
        if spec.theta == "log":
            det, _ = det_adj(J)
            pos = det > 0.0
            if not np.all(pos):
                state["bad"] = True
            out[:, 1] = -np.log(np.where(pos, det, 1.0))
        elif spec.theta == "none":
            out[:, 1] = 0.0
        else:
            raise ConfigurationError("unknown barrier %r" % spec.theta)
        return out

    tot = integrate(integrand, domain, res)
    if state["bad"]:
        return EnergyResult(float("inf"), True, float(tot[0]), float("inf"))
    return EnergyResult(float(tot.sum()), False, float(tot[0]), float(tot[1]))


@dataclass(frozen=True)
class ImmersionResult:
    stretch: float
    bending: float

    @property
    def total(self):
        return self.stretch + self.bending


def immersion_energy(surf, domain, res=None):
    """``int dist^n(df, isometries) + |grad nu|_F^n`` for a surface ``R^n -> R^{n+1}``.

    The distance to the linear isometries is ``sum (sigma_i - 1)^2`` over the
    singular values of ``df``, raised to ``n/2``.
    """
    n = surf.field.n

    def integrand(x):
        s = np.linalg.svd(surf.field.jacobian(x), compute_uv=False)
        out = np.empty((len(x), 2))
        out[:, 0] = (((s - 1.0) ** 2).sum(axis=1)) ** (n / 2.0)
        out[:, 1] = np.linalg.norm(surf.normal_grad(x), axis=(1, 2)) ** n
        return out

    tot = integrate(integrand, domain, res)
    return ImmersionResult(float(tot[0]), float(tot[1]))
