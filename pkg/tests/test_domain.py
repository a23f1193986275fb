from math import pi

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brouwerkit.domain import (Annulus, Ball, ball_template, boundary_mesh, cell_quadrature, inner_domain,
                               make_domain, sphere_mesh, tubular_project)
from brouwerkit.errors import ConfigurationError, DomainError, TubeError

coords = st.floats(-0.99, 0.99)


def disk(res=64):
    return make_domain("ball", ((0.0, 0.0), 1.0), res)


def test_resolution_floor():
    with pytest.raises(ConfigurationError):
        make_domain("ball", ((0, 0), 1.0), 4)
    with pytest.raises(ConfigurationError):
        boundary_mesh(disk(), 8)


def test_bad_extents():
    with pytest.raises(ConfigurationError):
        make_domain("box", ((0, 0), (1, -1)), 16)
    with pytest.raises(ConfigurationError):
        make_domain("ball", ((0, 0), -1.0), 16)
    with pytest.raises(ConfigurationError):
        make_domain("torus", ((0, 0), 1.0), 16)


@pytest.mark.parametrize("res,tol", [(64, 2e-3), (128, 5e-4)])
def test_disk_area(res, tol):
    _, w = disk(res).quadrature()
    assert w.sum() == pytest.approx(pi, abs=tol)


def test_box_and_ball_volumes():
    box = make_domain("box", ((0, 0, 0), (1, 2, 0.5)), 16)
    assert box.quadrature()[1].sum() == pytest.approx(1.0, rel=1e-12)
    ball = make_domain("ball", ((0, 0, 0), 1.0), 32)
    assert ball.volume == pytest.approx(4 * pi / 3)
    assert ball.quadrature()[1].sum() == pytest.approx(4 * pi / 3, rel=5e-3)


def test_quadrature_integrates_quadratic():
    # int_disk |x|^2 = pi/2
    x, w = disk(128).quadrature()
    assert np.dot(w, (x ** 2).sum(1)) == pytest.approx(pi / 2, rel=1e-3)


def test_chunks_cover_the_same_nodes():
    lo, hi = np.zeros(2), np.ones(2)
    parts = list(cell_quadrature(lo, hi, 32, chunk=100))
    assert len(parts) > 1
    assert sum(w.sum() for _, w in parts) == pytest.approx(1.0)


@pytest.mark.parametrize("n,vol", [(2, pi), (3, 4 * pi / 3)])
def test_ball_template_mass(n, vol):
    off, w = ball_template(n, 32 if n == 2 else 16)
    assert w.sum() == pytest.approx(vol, rel=5e-3)
    assert np.all(np.linalg.norm(off, axis=1) <= 1.0 + 1e-12)
    with pytest.raises(ValueError):
        w[0] = 1.0


@settings(max_examples=50, deadline=None)
@given(coords, coords)
def test_signed_distance_disk(a, b):
    x = np.array([a, b])
    assert disk().signed_distance(x) == pytest.approx(np.hypot(a, b) - 1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.91, 1.09), st.floats(0, 2 * pi))
def test_reflection_is_an_involution(r, t):
    D = disk()
    x = np.array([r * np.cos(t), r * np.sin(t)])
    tp = tubular_project(D, x)
    assert np.linalg.norm(tp.projection) == pytest.approx(1.0)
    assert tp.signed_distance == pytest.approx(r - 1.0)
    np.testing.assert_allclose(D.reflect(D.reflect(x[None]))[0], x, atol=1e-12)


def test_tube_limit():
    D = disk()
    with pytest.raises(TubeError):
        tubular_project(D, np.array([0.5, 0.0]))
    with pytest.raises(TubeError):
        D.reflect(np.array([[0.0, 0.0]]))


def test_box_projection_picks_nearest_face():
    B = make_domain("box", ((0, 0), (2, 1)), 16)
    np.testing.assert_allclose(B.project(np.array([[1.0, 0.1], [1.95, 0.5]])), [[1.0, 0.0], [2.0, 0.5]])
    assert B.signed_distance(np.array([1.0, 0.1])) == pytest.approx(-0.1)


def test_inner_domain_bounds():
    D = disk()
    assert inner_domain(D, 0.2).radius == pytest.approx(0.8)
    with pytest.raises(DomainError):
        inner_domain(D, 0.5)


@pytest.mark.parametrize("N", [16, 64, 256])
def test_polygon_perimeter(N):
    m = boundary_mesh(disk(), N)
    assert m.is_closed()
    assert m.total_measure == pytest.approx(2 * N * np.sin(pi / N), rel=1e-12)
    assert np.all(np.einsum("ij,ij->i", m.normals, m.centroids) > 0)


def test_icosphere_area_and_orientation():
    m = boundary_mesh(make_domain("ball", ((0, 0, 0), 1.0), 16), 320)
    assert m.is_closed()
    assert m.total_measure == pytest.approx(4 * pi, abs=1e-3)
    assert np.all(np.einsum("ij,ij->i", m.normals, m.centroids) > 0)


def test_box_surface():
    B = make_domain("box", ((0, 0, 0), (1, 2, 3)), 16)
    m = boundary_mesh(B, 64)
    assert m.is_closed()
    assert m.total_measure == pytest.approx(2 * (2 + 3 + 6))
    c = np.array([0.5, 1.0, 1.5])
    assert np.all(np.einsum("ij,ij->i", m.normals, m.centroids - c) > 0)


def test_sphere_mesh_containment():
    with pytest.raises(DomainError):
        sphere_mesh((0.5, 0.0), 0.6, 64, disk())
    assert sphere_mesh((0.5, 0.0), 0.4, 64, disk()).total_measure == pytest.approx(0.8 * pi, rel=1e-3)


def test_region_weights():
    _, w = Annulus((0.0, 0.0), 0.1, 1.0).quadrature(128)
    assert w.sum() == pytest.approx(pi * (1 - 0.01), rel=1e-4)
    _, w = Ball((0.0, 0.0), 0.5).quadrature()
    assert w.sum() == pytest.approx(pi / 4, rel=5e-3)
    D = disk()
    _, w = Ball((0.9, 0.0), 0.5, D).quadrature()
    assert w.sum() < pi / 4
