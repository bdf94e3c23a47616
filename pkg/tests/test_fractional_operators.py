from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from psiplap.coordinate_map import PsiMap, build_grid
from psiplap.errors import GridError, NumericError, ParameterError
from psiplap.fractional_operators import (
    FractionalOrder,
    GridFunction,
    caputo_hilfer_right,
    frac_integral_left,
    frac_integral_right,
    hilfer_deriv_left,
    hilfer_deriv_right,
    ibp_hilfer_defect,
    ibp_hilfer_terms,
    ibp_integral_defect,
)
from psiplap.studies import half_hat_boundary_term, observed_orders

ID = PsiMap.identity()


def gf(grid, f):
    return GridFunction.from_callable(grid, f)


# -- types -------------------------------------------------------------------


def test_order_validation_and_exponents():
    o = FractionalOrder(0.3, 0.25)
    assert o.gamma1 + o.gamma2 == pytest.approx(0.7, abs=1e-15)
    assert o.gamma1 == pytest.approx(0.75 * 0.7)
    for a, b in [(0.0, 0.5), (1.2, 0.5), (0.5, -0.1), (0.5, 1.1), (float("nan"), 0.5)]:
        with pytest.raises(ParameterError):
            FractionalOrder(a, b)
    assert FractionalOrder.classical().is_classical


def test_grid_function_validation():
    g = build_grid(1.0, 9)
    with pytest.raises(GridError):
        GridFunction(g, np.zeros(8))
    with pytest.raises(NumericError):
        GridFunction(g, np.full(9, np.nan))
    with pytest.raises(GridError):
        gf(g, np.sin) + gf(build_grid(1.0, 9), np.sin)
    f = gf(g, np.sin)
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_grid_mismatch_in_operators():
    g1, g2 = build_grid(1.0, 17), build_grid(1.0, 17)
    with pytest.raises(GridError):
        ibp_integral_defect(0.5, ID, gf(g1, np.sin), gf(g2, np.sin))


# -- integrals -----------------------------------------------------------------


def test_zero_maps_to_zero():
    g = build_grid(1.0, 33)
    z = GridFunction.zeros(g)
    o = FractionalOrder(0.4, 0.3)
    for out in (frac_integral_left(0.5, ID, z), frac_integral_right(0.5, ID, z), hilfer_deriv_left(o, ID, z),
                hilfer_deriv_right(o, ID, z), caputo_hilfer_right(o, ID, z)):
        assert np.all(out.values == 0.0)


def test_power_rule_constant():
    g = build_grid(1.0, 257)
    one = gf(g, np.ones_like)
    assert frac_integral_left(0.5, ID, one).values[-1] == pytest.approx(1.0 / math.gamma(1.5), rel=1e-12)
    assert frac_integral_left(0.5, ID, one).values[0] == 0.0
    assert frac_integral_right(0.5, ID, one).values[0] == pytest.approx(1.0 / math.gamma(1.5), rel=1e-12)
    assert frac_integral_right(0.5, ID, one).values[-1] == 0.0


def test_semigroup_on_constant():
    g = build_grid(1.0, 257)
    one = gf(g, np.ones_like)
    twice = frac_integral_left(0.5, ID, frac_integral_left(0.5, ID, one))
    assert twice.values[-1] == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("key", sorted(oracles.I_SIN))
def test_left_integral_against_quadrature(key):
    alpha, x = key
    g = build_grid(x, 513)
    approx = frac_integral_left(alpha, ID, gf(g, np.sin)).values[-1]
    assert approx == pytest.approx(oracles.I_SIN[key], rel=1e-5)


def test_right_integral_against_quadrature():
    g = build_grid(1.0, 513)
    approx = frac_integral_right(0.5, ID, gf(g, np.exp)).values[0]
    assert approx == pytest.approx(oracles.I_RIGHT_EXP_05_AT_0, rel=1e-5)


def test_left_integral_live_quadrature_interior():
    g = build_grid(1.0, 257)
    f = lambda s: np.exp(s) * np.cos(3 * s)
    approx = frac_integral_left(0.35, ID, gf(g, f)).values
    for i in (40, 128, 200):
        ref = oracles.left_integral_quad(0.35, f, g.nodes[i])
        assert approx[i] == pytest.approx(ref, rel=1e-4, abs=1e-8)


def test_right_is_reflected_left():
    g = build_grid(1.0, 129)
    right = frac_integral_right(0.6, ID, gf(g, lambda s: s)).values
    left = frac_integral_left(0.6, ID, gf(g, lambda s: 1.0 - s)).values
    np.testing.assert_allclose(right, left[::-1], atol=1e-14)


def test_power_map_integral_matches_quadrature():
    psi = PsiMap.power(2.0)
    g = build_grid(1.0, 513, psi)
    f = lambda xi: np.cos(xi)
    approx = frac_integral_left(0.5, psi, gf(g, f)).values[-1]
    # in u = xi^2 the integrand is cos(sqrt(u)) over u in [0, 1]
    ref = oracles.left_integral_quad(0.5, lambda u: math.cos(math.sqrt(u)), 1.0)
    assert approx == pytest.approx(ref, rel=1e-4)


coef = st.floats(-5.0, 5.0)


@given(st.floats(0.05, 1.5), coef, coef)
def test_integral_linearity(alpha, a, b):
    g = build_grid(1.0, 65)
    f1, f2 = gf(g, np.sin), gf(g, np.exp)
    lhs = frac_integral_left(alpha, ID, a * f1 + b * f2).values
    rhs = a * frac_integral_left(alpha, ID, f1).values + b * frac_integral_left(alpha, ID, f2).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + abs(a) + abs(b)) * 10)


# -- Hilfer derivatives --------------------------------------------------------


@pytest.mark.parametrize("beta", [0.0, 0.5])
def test_hilfer_constant_rule(beta):
    g = build_grid(1.0, 513)
    alpha = 0.4
    d = hilfer_deriv_left(FractionalOrder(alpha, beta), ID, gf(g, np.ones_like)).values
    mask = g.nodes >= 0.1
    exact = g.nodes[mask] ** (-alpha) / math.gamma(1 - alpha)
    assert np.max(np.abs(d[mask] - exact) / exact) < 1e-2


def test_hilfer_constant_killed_at_beta_one():
    g = build_grid(1.0, 257)
    d = hilfer_deriv_left(FractionalOrder(0.6, 1.0), ID, gf(g, lambda s: 3.0 + 0 * s)).values
    assert np.max(np.abs(d)) < 1e-8


@given(st.floats(0.1, 0.9), st.floats(0.0, 1.0))
def test_hilfer_of_square_is_beta_independent(alpha, beta):
    # D u^2 = 2 u^(2 - alpha) / Gamma(3 - alpha) for every type beta
    g = build_grid(1.0, 257)
    d = hilfer_deriv_left(FractionalOrder(alpha, beta), ID, gf(g, np.square)).values
    exact = 2.0 * g.nodes ** (2 - alpha) / math.gamma(3 - alpha)
    assert np.max(np.abs(d - exact)[1:]) < 5e-3


def test_hilfer_right_constant_rule():
    T = 2.0
    g = build_grid(T, 513)
    alpha = 0.3
    d = hilfer_deriv_right(FractionalOrder(alpha, 0.0), ID, gf(g, lambda s: 2.0 + 0 * s)).values
    mask = g.nodes <= T - 0.1
    exact = 2.0 * (T - g.nodes[mask]) ** (-alpha) / math.gamma(1 - alpha)
    assert np.max(np.abs(d[mask] - exact) / exact) < 1e-2


def test_hilfer_right_is_reflected_left():
    g = build_grid(1.5, 129)
    o = FractionalOrder(0.55, 0.3)
    f = lambda s: np.exp(s) * np.sin(2 * s) + 0.5
    right = hilfer_deriv_right(o, ID, gf(g, f)).values
    left = hilfer_deriv_left(o, ID, gf(g, lambda s: f(1.5 - s))).values
    np.testing.assert_allclose(right[:-1], left[::-1][:-1], rtol=1e-10, atol=1e-10)


def test_hilfer_needs_five_nodes():
    g = build_grid(1.0, 4)
    with pytest.raises(GridError):
        hilfer_deriv_left(FractionalOrder(0.5, 0.5), ID, gf(g, np.sin))


def test_commuted_right_on_power():
    g = build_grid(1.0, 513)
    alpha = 0.6
    d = caputo_hilfer_right(FractionalOrder(alpha, 1.0), ID, gf(g, lambda s: (1 - s) ** alpha)).values
    mask = g.nodes <= 0.9
    assert np.max(np.abs(d[mask] - math.gamma(alpha + 1))) < 1e-2


@given(st.floats(0.1, 0.9), st.integers(0, 2**31 - 1))
def test_commuted_at_beta_zero_equals_right_at_beta_one(alpha, seed):
    g = build_grid(1.0, 65)
    rng = np.random.default_rng(seed)
    c = rng.normal(size=4)
    f = gf(g, lambda s: c[0] + c[1] * np.sin(2 * s) + c[2] * np.exp(-s) + c[3] * s**2)
    a = caputo_hilfer_right(FractionalOrder(alpha, 0.0), ID, f).values
    b = hilfer_deriv_right(FractionalOrder(alpha, 1.0), ID, f).values
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * np.max(np.abs(b)))


# -- integration by parts ------------------------------------------------------


def test_ibp_zero_function():
    g = build_grid(1.0, 33)
    z, s = GridFunction.zeros(g), gf(g, np.sin)
    assert ibp_integral_defect(0.5, ID, z, s) == 0.0
    assert ibp_hilfer_defect(FractionalOrder(0.5, 0.5), ID, z, s) == 0.0


def test_ibp_integral_ones():
    defects = []
    for n in (64, 128, 256):
        g = build_grid(1.0, n)
        defects.append(abs(ibp_integral_defect(0.5, ID, gf(g, np.ones_like), gf(g, np.ones_like))))
    assert defects[-1] < 1e-3
    assert all(b <= a or b < 1e-14 for a, b in zip(defects, defects[1:]))


def test_ibp_integral_order_random_pair():
    levels = (33, 65, 129, 257)
    errs = []
    for n in levels:
        g = build_grid(1.0, n)
        errs.append(abs(ibp_integral_defect(0.3, ID, gf(g, lambda s: np.exp(s) * np.cos(2 * s)),
                                            gf(g, lambda s: 1 + s - s**3))))
    assert np.all(observed_orders(levels, errs) >= 1.0)


def test_ibp_hilfer_smooth_pair():
    o = FractionalOrder(0.6, 0.5)
    defects = []
    for n in (128, 256, 512):
        g = build_grid(1.0, n)
        defects.append(abs(ibp_hilfer_defect(o, ID, gf(g, np.exp), gf(g, lambda s: np.sin(np.pi * s)))))
    assert defects[-1] < 1e-2
    assert defects[0] > defects[1] > defects[2]


@pytest.mark.parametrize("beta", [0.0, 0.5, 1.0])
def test_half_hat_boundary_terms(beta):
    o = FractionalOrder(0.5, beta)
    g = build_grid(1.0, 513)
    terms = ibp_hilfer_terms(o, ID, gf(g, np.ones_like), gf(g, lambda s: 1.0 - s))
    expected = half_hat_boundary_term(o, 1.0)
    assert terms.boundary_right + terms.boundary_left == pytest.approx(expected, abs=1e-12)
    # the truncated identity leaves exactly the boundary terms, up to discretization
    assert terms.truncated_defect == pytest.approx(expected, abs=0.05)
