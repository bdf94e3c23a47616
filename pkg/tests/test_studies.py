from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import space
from psiplap.coordinate_map import PsiMap, build_grid
from psiplap.errors import ParameterError
from psiplap.fractional_operators import FractionalOrder
from psiplap.studies import (
    classical_exact,
    classical_solve_study,
    ibp_study,
    is_monotone_decreasing,
    observed_orders,
    power_rule_error,
    power_rule_study,
    self_reference_study,
)


@given(st.floats(0.5, 4.0), st.floats(1e-6, 1.0))
def test_observed_orders_recover_exact_rate(q, c):
    levels = (17, 33, 65, 129)
    errs = [c * (1.0 / (n - 1)) ** q for n in levels]
    np.testing.assert_allclose(observed_orders(levels, errs), q, rtol=1e-10)


def test_monotone_with_floor():
    assert is_monotone_decreasing([1e-3, 1e-4, 1e-15, 2e-15])
    assert not is_monotone_decreasing([1e-3, 1e-4, 2e-4])


def test_power_rule_study_alpha_half():
    st_ = power_rule_study(0.5)
    assert st_.passed and st_.min_order >= 1.8 and st_.errors[-1] < 1e-3


def test_power_rule_exact_for_linear_integrand():
    # delta = 2 gives a piecewise-linear integrand, integrated exactly
    g = build_grid(1.0, 33)
    assert power_rule_error(g, 0.4, 2.0) < 1e-13


def test_classical_solve_study_orders():
    st_ = classical_solve_study(2.0, levels=(32, 64, 128))
    assert st_.passed and st_.min_order >= 1.5


def test_classical_exact_solves_the_ode():
    u = classical_exact(3.0, 1.0)
    s = np.array([0.1, 0.25, 0.4, 0.6, 0.75, 0.9])  # away from the kink of u" at the midpoint
    h = 1e-4
    du = lambda x: (u(x + h) - u(x - h)) / (2 * h)
    flux = lambda x: np.abs(du(x)) * du(x)
    assert u(np.array([0.0, 1.0])) == pytest.approx([0.0, 0.0], abs=1e-15)
    np.testing.assert_allclose(-(flux(s + h) - flux(s - h)) / (2 * h), 1.0, atol=1e-4)


def test_self_reference_monotone():
    st_ = self_reference_study(space(2.0, 0.7, 0.5), levels=(32, 64, 128), reference_n=256)
    assert st_.monotone
    with pytest.raises(ParameterError):
        self_reference_study(space(2.0, 0.7, 0.5), levels=(32, 64), reference_n=64)


def test_study_level_validation():
    with pytest.raises(ParameterError):
        power_rule_study(0.5, levels=(64,))
    with pytest.raises(ParameterError):
        power_rule_study(0.5, levels=(128, 64))


def test_ibp_study_default():
    res = ibp_study(FractionalOrder(0.5, 0.5))
    assert res.passed
    assert all(v < 1e-3 for v in res.final.values())
    # the half-hat pair keeps a persistent defect equal to its boundary terms
    assert abs(res.observed_boundary - res.expected_boundary) < 0.05
    assert res.boundary_gaps[-1] < res.boundary_gaps[0]


def test_ibp_study_needs_two_levels():
    with pytest.raises(ParameterError):
        ibp_study(FractionalOrder(0.5, 0.5), levels=(8,))


def test_ibp_study_power_map():
    res = ibp_study(FractionalOrder(0.3, 0.5), levels=(64, 128, 256), psi=PsiMap.power(2.0))
    assert res.passed
