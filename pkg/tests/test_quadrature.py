import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from bnmrf import geometry as G
from bnmrf import kernels as K
from bnmrf import quadrature as Q
from bnmrf.errors import DegenerateTriangle, InvalidOrder, TargetNotOnPanel

# arbitrary-precision adaptive integration of (i/4) H0(2|y - c|) over a straight panel of
# length 0.1 with c its midpoint
H2D_SELF_K2_L01 = 0.0543576416550291526889947685285 + 0.0249791744776167558250173304221j
# closed-form planar potential int dS / (4 pi |c - y|) of the unit equilateral triangle at its centroid
EQUILATERAL_POTENTIAL = 0.181519235657141360868563977867

EQUILATERAL = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, math.sqrt(3) / 2, 0.0]])


def test_gauss_legendre_small():
    r = Q.gauss_legendre(1)
    assert r.nodes.tolist() == [0.0] and r.weights.tolist() == [2.0]
    r = Q.gauss_legendre(2)
    assert_allclose(r.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], rtol=1e-15)
    assert_allclose(r.weights, [1.0, 1.0], rtol=1e-15)
    r = Q.gauss_legendre(3)
    assert_allclose(np.sum(r.weights * r.nodes**4), 0.4, rtol=1e-15)


@pytest.mark.parametrize("n", range(1, 17))
def test_gauss_legendre_exactness(n):
    r = Q.gauss_legendre(n)
    assert abs(r.weights.sum() - 2.0) <= 1e-12
    assert np.all(r.weights > 0) and np.all(np.abs(r.nodes) < 1)
    for m in range(2 * n):
        exact = 0.0 if m % 2 else 2.0 / (m + 1)
        assert abs(np.sum(r.weights * r.nodes**m) - exact) <= 1e-13


@pytest.mark.parametrize("n", [0, 65, -3])
def test_gauss_legendre_order_bounds(n):
    with pytest.raises(InvalidOrder):
        Q.gauss_legendre(n)


def test_gauss_log_moments():
    r = Q.gauss_log(8)
    for m in range(8):
        # int_0^1 s^m ln s ds = -1 / (m + 1)^2
        assert_allclose(np.sum(r.weights * r.nodes**m), -1.0 / (m + 1) ** 2, rtol=1e-12)


def test_integrate_panel_lengths():
    rule = Q.gauss_legendre(5)
    p = G.line_panel([0.0, 0.0], [0.3, 0.4])
    assert_allclose(Q.integrate_panel(p, lambda y: np.ones(len(y)), rule), 0.5, rtol=1e-15)
    arc = G.arc_panel([0.0, 0.0], 1.0, 0.0, np.pi / 2)
    assert_allclose(Q.integrate_panel(arc, lambda y: np.ones(len(y)), rule), np.pi / 2, rtol=1e-15)


def test_integrate_panel_far_self_convergence():
    p = G.line_panel([0.0, 0.0], [0.2, 0.1])
    x = np.array([1.0, 2.0])

    def f(y):
        return K.fundamental(K.laplace(2), x, y)

    a = Q.integrate_panel(p, f, Q.gauss_legendre(10))
    b = Q.integrate_panel(p, f, Q.gauss_legendre(40))
    assert abs(a - b) <= 1e-10


def test_self_convergence_rate():
    p = G.line_panel([0.0, 0.0], [1.0, 0.0])
    x = np.array([0.4, 1.0])
    kind = K.helmholtz(2, 6.0)

    def f(y):
        return K.normal_derivative_y(kind, x, y, np.array([0.0, 1.0])) * np.cos(3 * y[:, 0])

    vals = [Q.integrate_panel(p, f, Q.gauss_legendre(n)) for n in (5, 10, 20, 40)]
    diffs = [abs(vals[i] - vals[i + 1]) for i in range(3)]
    assert diffs[1] <= diffs[0] / 10
    assert diffs[2] <= max(diffs[1] / 10, 1e-15)


@pytest.mark.parametrize("L", [0.05, 0.3, 1.0, 2.7])
def test_laplace_single_layer_self_closed_form(L):
    p = G.line_panel([0.1, -0.2], [0.1 + 0.6 * L, -0.2 + 0.8 * L])
    val = Q.integrate_panel_singular(p, p.midpoint, lambda y: np.ones(len(y)), K.laplace(2))
    exact = -(L / (2 * np.pi)) * (math.log(L / 2) - 1)
    assert abs(val - exact) <= 1e-12 * max(abs(exact), 1e-3)


def test_laplace_single_layer_off_center_target():
    L, s = 1.0, 0.3
    p = G.line_panel([0.0, 0.0], [L, 0.0])
    val = Q.integrate_panel_singular(p, [s, 0.0], lambda y: np.ones(len(y)), K.laplace(2))
    a, b = s, L - s
    exact = -(a * math.log(a) - a + b * math.log(b) - b) / (2 * np.pi)
    assert_allclose(val, exact, rtol=1e-12)


def test_double_layer_flat_panel_is_zero():
    p = G.line_panel([0.0, 0.0], [0.5, 0.5])
    for kind in (K.laplace(2), K.helmholtz(2, 4.0)):
        val = Q.integrate_panel_singular(p, p.midpoint, lambda y: np.ones(len(y)), kind, "double_layer")
        assert abs(val) <= 1e-14


def test_helmholtz_single_layer_self_oracle():
    p = G.line_panel([0.0, 0.0], [0.1, 0.0])
    val = Q.integrate_panel_singular(p, p.midpoint, lambda y: np.ones(len(y)), K.helmholtz(2, 2.0))
    assert abs(val - H2D_SELF_K2_L01) <= 1e-8 * abs(H2D_SELF_K2_L01)


def test_singular_smooth_density_converges():
    p = G.arc_panel([0.0, 0.0], 1.0, 0.0, 0.4)
    kind = K.helmholtz(2, 3.0)
    target = p.point(0.35)

    def f(y):
        return np.exp(y[:, 0]) * np.cos(2 * y[:, 1])

    a = Q.integrate_panel_singular(p, target, f, kind, n=16)
    b = Q.integrate_panel_singular(p, target, f, kind, n=32)
    assert abs(a - b) <= 1e-10 * abs(b)


def test_target_not_on_panel():
    p = G.line_panel([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(TargetNotOnPanel):
        Q.integrate_panel_singular(p, [0.5, 0.1], lambda y: np.ones(len(y)), K.laplace(2))


def test_triangle_rule_basic():
    r = Q.triangle_rule_7()
    assert len(r) == 7
    assert abs(r.weights.sum() - 0.5) <= 1e-12
    assert np.all(r.weights > 0)
    assert np.all(r.nodes > 0) and np.all(r.nodes.sum(axis=1) < 1)
    unit = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert_allclose(Q.integrate_triangle(unit, lambda p: p[:, 0], r), 1 / 6, rtol=1e-14)


def test_triangle_rule_monomials():
    r = Q.triangle_rule_7()
    x, y = r.nodes[:, 0], r.nodes[:, 1]
    for a in range(6):
        for b in range(6 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            assert_allclose(np.sum(r.weights * x**a * y**b), exact, rtol=1e-13)


def test_subdivided_rule_weights():
    for lev in range(3):
        r = Q.subdivided_triangle_rule(lev)
        assert len(r) == 7 * 4**lev
        assert_allclose(r.weights.sum(), 0.5, rtol=1e-14)


def test_integrate_triangle_area_and_degenerate():
    tri = np.array([[0.0, 0.0, 1.0], [2.0, 0.0, 1.0], [0.0, 3.0, 2.0]])
    area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
    assert_allclose(Q.integrate_triangle(tri, lambda p: np.ones(len(p))), area, rtol=1e-14)
    flat = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    with pytest.raises(DegenerateTriangle):
        Q.integrate_triangle(flat, lambda p: np.ones(len(p)))


def test_centroid_potential_closed_form():
    assert_allclose(Q.triangle_centroid_potential(EQUILATERAL), EQUILATERAL_POTENTIAL, rtol=1e-14)


def test_duffy_singular_against_closed_form():
    val = Q.integrate_triangle_singular(EQUILATERAL, K.laplace(3))
    assert_allclose(val, EQUILATERAL_POTENTIAL, rtol=1e-10)
    tri = np.array([[0.0, 0.0, 0.0], [1.3, 0.2, 0.1], [0.1, 0.9, -0.4]])
    assert_allclose(Q.integrate_triangle_singular(tri, K.laplace(3)),
                    Q.triangle_centroid_potential(tri), rtol=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 20.0))
def test_singular_scales_linearly(s):
    base = Q.integrate_triangle_singular(EQUILATERAL, K.laplace(3))
    assert_allclose(Q.integrate_triangle_singular(s * EQUILATERAL, K.laplace(3)), s * base, rtol=1e-12)


def test_helmholtz_minus_laplace_small():
    for s in (0.01, 0.1):
        k = 1.0
        diff = (Q.integrate_triangle_singular(s * EQUILATERAL, K.helmholtz(3, k))
                - Q.integrate_triangle_singular(s * EQUILATERAL, K.laplace(3)))
        area = s * s * math.sqrt(3) / 4
        # e^{ikr}/r - 1/r = ik + O(k^2 r)
        assert abs(diff - 1j * k * area / (4 * np.pi)) <= k * k * s * area
