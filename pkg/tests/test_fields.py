from math import pi

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sint

from brouwerkit.domain import Annulus, Ball, boundary_mesh, make_domain, sphere_mesh
from brouwerkit.errors import ConfigurationError, MarginError
from brouwerkit.fields import (BumpTestField, GridField, MapField, adjugate_identity_check, coarea_check,
                               det_adj, gradient, integrate, lebesgue_average, read_grid, sample_grid,
                               sobolev_energy, sphere_trace, write_grid)
from brouwerkit.mapzoo import preset


def disk(res=128):
    return make_domain("ball", ((0.0, 0.0), 1.0), res)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2 ** 31 - 1))
def test_adjugate_algebra(n, seed):
    J = np.random.default_rng(seed).normal(size=(4, n, n))
    det, adj = det_adj(J)
    np.testing.assert_allclose(det, np.linalg.det(J), rtol=1e-10, atol=1e-12)
    eye = det[:, None, None] * np.eye(n)
    np.testing.assert_allclose(adj @ J, eye, atol=1e-10 * (1 + np.abs(det).max()))
    np.testing.assert_allclose(J @ adj, eye, atol=1e-10 * (1 + np.abs(det).max()))


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_exact_gradients_match_differences(a, b):
    x = np.array([[a, b]])
    for name in ("diffeo1", "zpow", "fold", "bubble", "rotation"):
        f = preset(name).field
        np.testing.assert_allclose(f.jacobian(x), f.fd_jacobian(x, 1e-6), atol=2e-6 * (1 + abs(f.jacobian(x)).max()))


def test_call_keeps_leading_shape():
    f = preset("identity").field
    x = np.zeros((3, 4, 2))
    assert f(x).shape == (3, 4, 2)
    assert f.jacobian(x).shape == (3, 4, 2, 2)


def test_fd_fallback_without_gradient():
    f = MapField(lambda x: x ** 2, 2, 2)
    assert not f.has_exact_gradient
    np.testing.assert_allclose(f.jacobian(np.array([[0.3, -0.2]])), [[[0.6, 0], [0, -0.4]]], atol=1e-8)


def test_gradient_margin():
    D = disk(16)
    g = sample_grid(preset("identity").field, D)
    with pytest.raises(MarginError):
        gradient(g, np.array([0.999, 0.0]))
    s = gradient(preset("rotation").field, np.array([0.1, 0.2]), domain=D)
    assert s.det == pytest.approx(1.0)


def test_integrals_against_closed_forms():
    D = disk()
    assert integrate(lambda x: np.ones(len(x)), D) == pytest.approx(pi, abs=1e-3)
    np.testing.assert_allclose(integrate(lambda x: x, D), [0, 0], atol=1e-10)
    # identity: |grad|^2 = 2 on the disk
    assert sobolev_energy(preset("identity").field, D, 2) == pytest.approx(2 * pi, abs=3e-3)
    # z^2: |grad|_F^2 = 8 r^2, integral 4 pi
    assert sobolev_energy(preset("zpow").field, D, 2) == pytest.approx(4 * pi, rel=1e-3)
    assert integrate(lambda x: np.ones(len(x)), boundary_mesh(D, 256)) == pytest.approx(2 * pi, rel=1e-3)


def test_cavitation_annulus_energy_against_quad():
    f = preset("cavitation").field
    exact = sint.quad(lambda r: 2 * pi * r * (1 + (1 + r) ** 2 / r ** 2), 0.05, 1.0)[0]
    assert sobolev_energy(f, Annulus((0, 0), 0.05, 1.0), 2) == pytest.approx(exact, rel=1e-5)


@pytest.mark.parametrize("r", [0.1, 0.5])
def test_sphere_trace_of_identity(r):
    tr = sphere_trace(preset("identity").field, sphere_mesh((0.0, 0.0), r, 512), (0.0, 0.0), r)
    assert tr.oscillation == pytest.approx(2 * r, rel=1e-4)
    assert tr.energy(2) == pytest.approx(2 * pi * r, rel=1e-4)


def test_sphere_trace_3d_rotation_invariant():
    c = np.zeros(3)
    tr = sphere_trace(preset("identity", n=3).field, sphere_mesh(c, 0.5, 160), c, 0.5)
    # tangential differential of the identity is the identity on the tangent plane: |df|^2 = 2
    np.testing.assert_allclose(tr.df, np.sqrt(2), rtol=1e-10)


def test_coarea_identity():
    c = coarea_check(preset("identity").field, (0.0, 0.0), 0.5)
    assert c.holds
    # circles carry |df|^2 = 1 while the ball carries 2
    assert c.lhs == pytest.approx(0.5 * c.rhs, rel=1e-2)


def test_lebesgue_average_of_affine_map():
    f = preset("diffeo1", amp=0.0).field
    np.testing.assert_allclose(lebesgue_average(f, (0.2, -0.3), 0.1), [0.2, -0.3], atol=1e-12)


def test_bump_gradient():
    eta = BumpTestField.seeded((0.1, 0.0), 0.5, seed=1)
    x = np.array([[0.2, 0.1], [0.0, -0.2]])
    h = 1e-6
    fd = np.stack([(eta(x + h * e) - eta(x - h * e)) / (2 * h) for e in np.eye(2)], axis=-1)
    np.testing.assert_allclose(eta.grad(x), fd, atol=1e-7)
    assert np.all(eta(np.array([[0.7, 0.0]])) == 0.0)


@pytest.mark.parametrize("name", ["identity", "zpow", "diffeo1", "fold"])
def test_adjugate_identity_small(name):
    eta = BumpTestField.seeded((0.0, 0.1), 0.6, seed=7)
    assert adjugate_identity_check(preset(name).field, disk(128), eta) < 1e-5


def test_adjugate_rejects_non_square():
    from brouwerkit.mapzoo import surface
    with pytest.raises(ConfigurationError):
        adjugate_identity_check(surface("flat").field, disk(16))


def test_grid_field_roundtrip(tmp_path):
    D = disk(16)
    g = sample_grid(preset("diffeo1").field, D, order=1)
    path = tmp_path / "g.csv"
    write_grid(g, path)
    h = read_grid(path)
    assert h.domain == D and h.order == 1
    np.testing.assert_array_equal(h.samples, g.samples)


def test_grid_field_reproduces_affine_maps():
    D = make_domain("box", ((0, 0), (1, 1)), 8)
    A = np.array([[1.0, 2.0], [-0.5, 0.3]])
    g = sample_grid(MapField(lambda x: x @ A.T, 2, 2), D, order=1)
    x = np.random.default_rng(0).uniform(0, 1, (20, 2))
    np.testing.assert_allclose(g(x), x @ A.T, atol=1e-12)
    np.testing.assert_allclose(g.jacobian(np.array([[0.5, 0.5]]))[0], A, atol=1e-10)


def test_grid_field_shape_check():
    with pytest.raises(ConfigurationError):
        GridField(disk(8), np.zeros((5, 2)))
