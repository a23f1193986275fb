from math import pi

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import integrate as sint

from brouwerkit.degree import (boundary_pullback_degree, bump_mass, degree, degree_axiom_harness,
                               degree_by_counting, degree_by_integral, image_clearance, integral_raw, solid_angle_degree,
                               winding_degree, winding_number)
from brouwerkit.domain import boundary_mesh, make_domain
from brouwerkit.errors import BoundaryProximityError, DegenerateError, SupportError
from brouwerkit.mapzoo import parse_map_spec, preset


@pytest.fixture(scope="module")
def D():
    return make_domain("ball", ((0.0, 0.0), 1.0), 128)


def circle(k=1, n=256):
    t = np.linspace(0, 2 * pi, n, endpoint=False)
    return np.stack([np.cos(k * t), np.sin(k * t)], axis=1)


def test_counting_identity(D):
    r = degree_by_counting(preset("identity").field, D, np.zeros(2))
    assert r.value == 1 and not r.inconclusive
    (z, s), = r.preimages
    np.testing.assert_allclose(z, 0.0, atol=1e-10)
    assert s == 1


def test_counting_outside_image(D):
    assert degree_by_counting(preset("identity").field, D, np.array([2.0, 0.0])).value == 0


def test_counting_zpow_preimages(D):
    r = degree_by_counting(preset("zpow").field, D, np.array([0.25, 0.0]))
    assert r.value == 2
    pts = sorted(tuple(np.round(z, 10)) for z, _ in r.preimages)
    assert pts == [(-0.5, 0.0), (0.5, 0.0)]
    assert all(s == 1 for _, s in r.preimages)


def test_counting_reflection(D):
    assert degree_by_counting(parse_map_spec("linear").field, D, np.array([0.1, 0.1])).value == -1


def test_counting_invariants(D):
    f = preset("zpow", k=3).field
    r = degree_by_counting(f, D, np.array([0.2, -0.1]))
    from brouwerkit.fields import det_adj
    for z, _ in r.preimages:
        assert np.linalg.norm(f(z[None])[0] - r.diagnostics.get("y_used", np.array([0.2, -0.1]))) < 1e-10
        assert abs(det_adj(f.jacobian(z[None]))[0][0]) > r.diagnostics["tau_regular"]


def test_boundary_proximity(D):
    with pytest.raises(BoundaryProximityError):
        degree_by_counting(preset("identity").field, D, np.array([1.0, 0.0]))


def test_integral_examples():
    D256 = make_domain("ball", ((0.0, 0.0), 1.0), 256)
    r = degree_by_integral(preset("identity").field, D256, np.zeros(2), 0.2)
    assert r.value == 1 and abs(r.raw - 1) < 0.02
    assert degree_by_integral(preset("zpow").field, D256, np.array([0.25, 0.0]), 0.1).value == 2
    assert degree_by_integral(parse_map_spec("linear").field, D256, np.array([0.1, 0.1])).value == -1


def test_integral_support_error(D):
    with pytest.raises(SupportError):
        degree_by_integral(preset("identity").field, D, np.array([0.95, 0.0]), 0.1)


def test_integral_refinement():
    f, y = preset("zpow").field, np.array([0.25, 0.1])
    e = [abs(integral_raw(f, make_domain("ball", ((0, 0), 1.0), r), y, 0.1) - 2) for r in (128, 256)]
    assert e[1] <= 0.5 * e[0]


@pytest.mark.parametrize("n", [2, 3])
def test_bump_mass_against_quad(n):
    from math import gamma
    area = 2 * pi ** (n / 2) / gamma(n / 2)
    exact = area * sint.quad(lambda r: np.exp(-1 / (1 - r * r)) * r ** (n - 1), 0, 1)[0]
    assert bump_mass(n, 1.0) == pytest.approx(exact, rel=1e-10)
    assert bump_mass(n, 0.3) == pytest.approx(exact * 0.3 ** n, rel=1e-10)


def test_winding_examples():
    assert winding_number(circle(), np.zeros(2)) == 1
    assert winding_number(circle(3), np.zeros(2)) == 3
    assert winding_number(circle(), np.array([2.0, 0.0])) == 0
    with pytest.raises(DegenerateError):
        winding_number(circle(), np.array([1.0, 0.0]))


@settings(max_examples=40, deadline=None)
@given(st.integers(-4, 4).filter(lambda k: k != 0), st.floats(0, 0.9), st.floats(0, 2 * pi))
def test_winding_reversal_negates(k, r, t):
    y = np.array([r * np.cos(t + 0.1), r * np.sin(t + 0.1)])
    c = circle(k, 128)
    assert winding_number(c, y) == k
    assert winding_number(c[::-1], y) == -k


def test_pullback_examples(D):
    r = boundary_pullback_degree(preset("identity").field, D, np.zeros(2))
    assert r.value == 1 and abs(r.raw - 1) < 0.05
    assert boundary_pullback_degree(preset("zpow").field, D, np.array([0.25, 0.0])).value == 2


def test_pullback_3d_identity():
    B = make_domain("ball", ((0.0, 0.0, 0.0), 1.0), 32)
    r = boundary_pullback_degree(preset("identity", n=3).field, B, np.zeros(3), bres=160, cells=12)
    assert r.value == 1


def test_solid_angle_sphere():
    m = boundary_mesh(make_domain("ball", ((0.0, 0.0, 0.0), 1.0), 16), 160)
    d = solid_angle_degree(m.vertices, m.elements, np.array([[0.1, 0.2, 0.0], [2.0, 0.0, 0.0]]))
    np.testing.assert_allclose(d, [1.0, 0.0], atol=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6))
def test_methods_agree_for_diffeo(a, b):
    D = make_domain("ball", ((0.0, 0.0), 1.0), 64)
    f, y = preset("diffeo1").field, np.array([a, b])
    # the bump method needs its support clear of f(boundary)
    assume(image_clearance(f, boundary_mesh(D, 256), y) > 0.15)
    vals = [degree(f, D, y, m).value for m in ("counting", "winding", "integral", "boundary")]
    assert len(set(vals)) == 1 and vals[0] == 1


def test_degree_dispatch_rejects_unknown(D):
    with pytest.raises(ValueError):
        degree(preset("identity").field, D, np.zeros(2), "guess")


def test_axiom_harness_rotation(D):
    probes = [(0.0, 0.0), (0.3, -0.2), (-0.4, 0.1)]
    rep = degree_axiom_harness(preset("rotation").field, D, probes, injective=True)
    assert rep.passed, rep.witnesses


def test_axiom_harness_zpow(D):
    rep = degree_axiom_harness(preset("zpow").field, D, [(0.25, 0.0), (-0.1, 0.3)])
    assert rep.passed, rep.witnesses
    assert set(rep.checks) >= {"attained", "constancy", "stability", "homotopy", "excision"}


def test_report_record_is_plain(D):
    import json
    rec = degree_by_counting(preset("zpow").field, D, np.array([0.25, 0.0])).record()
    assert json.loads(json.dumps(rec))["value"] == 2
