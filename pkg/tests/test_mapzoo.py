import json

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy import integrate as sint

from brouwerkit.degree import degree_by_counting
from brouwerkit.domain import make_domain
from brouwerkit.errors import ConfigurationError, DegenerateError
from brouwerkit.fields import MapField, det_adj
from brouwerkit.mapzoo import (CATALOGUE, EnergySpec, closest_rotation, elastic_energy, immersion_energy,
                               normal_field, parse_map_spec, preset, surface, tilde_F, tilde_domain)

X, Y = sp.symbols("x y", real=True)


def _sympy_map(expr):
    F = sp.Matrix(expr)
    J = F.jacobian([X, Y])
    return sp.lambdify((X, Y), F, "numpy"), sp.lambdify((X, Y), J, "numpy")


def test_zpow_symbolic():
    z = (X + sp.I * Y) ** 2
    f, J = _sympy_map([sp.re(sp.expand(z)), sp.im(sp.expand(z))])
    e = preset("zpow", k=2)
    p = np.array([[1.0, 0.0]])
    np.testing.assert_allclose(e.field(p)[0], [1.0, 0.0])
    assert det_adj(e.field.jacobian(p))[0][0] == pytest.approx(4.0)
    pts = np.random.default_rng(0).uniform(-1, 1, (20, 2))
    for q in pts:
        np.testing.assert_allclose(e.field.jacobian(q[None])[0], np.array(J(*q), dtype=float), atol=1e-12)


def test_diffeo1_symbolic():
    a = 0.15
    f, J = _sympy_map([X + a * sp.sin(2 * Y), Y + a * sp.sin(2 * X)])
    e = preset("diffeo1")
    for q in np.random.default_rng(1).uniform(-1, 1, (20, 2)):
        np.testing.assert_allclose(e.field(q[None])[0], np.ravel(f(*q)), atol=1e-14)
        np.testing.assert_allclose(e.field.jacobian(q[None])[0], np.array(J(*q), dtype=float), atol=1e-12)


def test_simple_presets():
    x = np.random.default_rng(2).uniform(-1, 1, (50, 2))
    det, _ = det_adj(preset("rotation", theta=np.pi / 3).field.jacobian(x))
    np.testing.assert_allclose(det, 1.0)
    c = preset("cavitation").field(np.array([[0.3, 0.4]]))
    assert np.linalg.norm(c) == pytest.approx(1.5)
    np.testing.assert_allclose(preset("angle").field(np.zeros((1, 2))), [[1.0, 0.0]])
    with pytest.raises(ConfigurationError):
        preset("nope")


@pytest.mark.parametrize("name", sorted(CATALOGUE))
def test_declared_det_sign(name):
    e = preset(name)
    x = np.random.default_rng(4).uniform(-1, 1, (1000, 2))
    x = x[np.linalg.norm(x, axis=1) > 1e-6]
    det, _ = det_adj(e.field.jacobian(x))
    sign = e.props["det_sign"]
    if sign == "+":
        assert np.all(det > 0)
    elif sign == "-":
        assert np.all(det < 0)
    elif sign == "0":
        np.testing.assert_allclose(det, 0.0, atol=1e-12)
    else:
        assert det.min() < 0 < det.max()
    assert set(e.provenance) >= {"det_sign", "injective"}


def test_zoo_records_are_json():
    for name in CATALOGUE:
        json.dumps(preset(name).record())


def test_shorthand():
    assert parse_map_spec("zpow:3").params == {"k": 3}
    assert parse_map_spec("linear:0,1,1,0").field(np.array([[1.0, 2.0]])).tolist() == [[2.0, 1.0]]
    with pytest.raises(ConfigurationError):
        parse_map_spec("angle:3")
    with pytest.raises(ConfigurationError):
        parse_map_spec("zpow:x")


def test_normals():
    x = np.random.default_rng(5).uniform(-0.5, 0.5, (30, 2))
    np.testing.assert_allclose(surface("flat").normal(x), np.tile([0, 0, 1.0], (30, 1)))
    np.testing.assert_allclose(surface("flat", swap=True).normal(x), np.tile([0, 0, -1.0], (30, 1)))
    np.testing.assert_allclose(surface("paraboloid").normal(np.zeros((1, 2))), [[0, 0, 1.0]])
    for name in ("paraboloid", "hemisphere"):
        s = surface(name)
        nu, J = s.normal(x), s.field.jacobian(x)
        np.testing.assert_allclose(np.linalg.norm(nu, axis=1), 1.0, atol=1e-9)
        np.testing.assert_allclose(np.einsum("pi,pij->pj", nu, J), 0.0, atol=1e-6)
    sq = MapField(lambda p: np.stack([p[:, 0] ** 2, p[:, 1], 0 * p[:, 0]], 1), 2, 3)
    with pytest.raises(DegenerateError):
        normal_field(sq, probes=[(0.0, 0.3)])


def test_tilde_examples():
    F = tilde_F(surface("flat"), 0.5)
    y = np.random.default_rng(6).uniform(-0.4, 0.4, (10, 3))
    np.testing.assert_allclose(F(y), y)
    np.testing.assert_allclose(det_adj(F.jacobian(y))[0], 1.0)
    H = tilde_F(surface("hemisphere"), 0.3)
    y[:, 2] *= 0.5
    p = surface("hemisphere").field(y[:, :2])
    np.testing.assert_allclose(H(y), (1 + y[:, 2:3]) * p, atol=1e-12)
    with pytest.raises(ConfigurationError):
        tilde_F(surface("flat"), 1.5)


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.2, 0.2))
def test_tilde_gradient_block_formula(a, b, t):
    F = tilde_F(surface("paraboloid"), 0.3)
    y = np.array([[a, b, t]])
    np.testing.assert_allclose(F.jacobian(y), F.fd_jacobian(y, 1e-5), atol=1e-5)


def test_tilde_flat_degree():
    T = tilde_domain((-1, -1), (1, 1), 0.5, 32)
    F = tilde_F(surface("flat"), 0.5)
    assert degree_by_counting(F, T, np.array([0.2, -0.3, 0.1])).value == 1


def test_elastic_examples():
    sq = make_domain("box", ((0, 0), (1, 1)), 16)
    r = elastic_energy(preset("rotation").field, sq, EnergySpec("log"))
    assert r.value == pytest.approx(0.0, abs=1e-12) and not r.infinite
    assert elastic_energy(parse_map_spec("linear:2,0,0,2").field, sq).value == pytest.approx(2.0)
    r = elastic_energy(parse_map_spec("linear").field, sq, EnergySpec("log"))
    assert r.infinite and r.value == float("inf")


def test_frame_indifference():
    sq = make_domain("box", ((-0.5, -0.5), (0.5, 0.5)), 16)
    f = preset("diffeo1").field
    R = np.array([[0.6, -0.8], [0.8, 0.6]])
    g = MapField(lambda x: f(x) @ R.T, 2, 2, lambda x: R @ f.jacobian(x))
    assert elastic_energy(g, sq).dist_term == pytest.approx(elastic_energy(f, sq).dist_term, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_closest_rotation_is_rotation(seed):
    J = np.random.default_rng(seed).normal(size=(3, 3))
    R = closest_rotation(J)
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0)


def test_immersion_examples():
    sq = make_domain("box", ((0, 0), (1, 1)), 16)
    r = immersion_energy(surface("flat"), sq)
    assert r.total == pytest.approx(0.0, abs=1e-14)
    r = immersion_energy(surface("stretched", lam=2.0), sq)
    assert (r.stretch, r.bending) == (pytest.approx(2.0), pytest.approx(0.0, abs=1e-14))


def test_hemisphere_bending_against_dblquad():
    box = make_domain("box", ((-0.5, -0.5), (0.5, 0.5)), 64)
    got = immersion_energy(surface("hemisphere"), box).bending
    # nu = (x, y, sqrt(1 - r^2)) so |grad nu|^2 = 2 + r^2 / (1 - r^2)
    exact = sint.dblquad(lambda y, x: 2 + (x * x + y * y) / (1 - x * x - y * y), -0.5, 0.5, -0.5, 0.5)[0]
    assert got == pytest.approx(exact, rel=1e-3)
