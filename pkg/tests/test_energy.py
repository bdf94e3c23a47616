from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import hat, random_bz, space
from psiplap import nonlinearity as nlc
from psiplap.coordinate_map import build_grid
from psiplap.energy import energy, energy_gradient, energy_hessian, flux, gradient_values, weak_residual
from psiplap.errors import BoundaryError, NumericError
from psiplap.fractional_operators import GridFunction
from psiplap.studies import observed_orders


def test_energy_zero():
    g = build_grid(1.0, 33)
    e = energy(GridFunction.zeros(g), space(2.5, 0.7, grid=g), nlc.power(3.0, 2.5))
    assert (e.kinetic, e.potential, e.total) == (0.0, 0.0, 0.0)


def test_energy_classical_parabola():
    g = build_grid(1.0, 1025)
    phi = GridFunction.from_callable(g, lambda x: x * (1 - x) / 2)
    e = energy(phi, space(2.0, 1.0, grid=g), nlc.affine(1.0))
    assert e.kinetic == pytest.approx(1 / 24, abs=1e-6)
    assert e.potential == pytest.approx(1 / 12, abs=1e-6)
    assert e.total == pytest.approx(-1 / 24, abs=1e-6)


@given(st.integers(0, 2**31 - 1), st.floats(1.2, 5.0), st.sampled_from([0.75, 0.9, 1.0]), st.floats(0.0, 1.0))
def test_energy_breakdown_invariants(seed, p, alpha, beta):
    g = build_grid(1.0, 33)
    sp = space(p, alpha, beta, grid=g)
    phi = GridFunction(g, random_bz(g, np.random.default_rng(seed)))
    e = energy(phi, sp, nlc.resonant_sine(1.0, p, 0.5))
    assert e.kinetic >= 0.0
    assert e.total == e.kinetic - e.potential
    doubled = energy(2 * phi, sp, nlc.zero())
    assert doubled.kinetic == pytest.approx(2**p * energy(phi, sp, nlc.zero()).kinetic, rel=1e-12)


def test_energy_requires_boundary_zero():
    g = build_grid(1.0, 9)
    with pytest.raises(BoundaryError):
        energy(GridFunction.from_callable(g, np.ones_like), space(2.0, 1.0), nlc.zero())


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_energy_non_finite_nonlinearity():
    g = build_grid(1.0, 9)
    bad = nlc.from_expression("log(abs(t))", "t*log(abs(t)) - t")
    phi = GridFunction(g, random_bz(g, np.random.default_rng(1)))
    with pytest.raises(NumericError):
        energy_gradient(phi, space(2.0, 1.0), bad)


def test_weak_residual_examples():
    g = build_grid(1.0, 257)
    sp = space(2.0, 1.0, grid=g)
    v = hat(g, 100)
    assert weak_residual(GridFunction.zeros(g), v, sp, nlc.linear(3.0)) == 0.0
    exact = GridFunction.from_callable(g, lambda x: x * (1 - x) / 2)
    assert abs(weak_residual(exact, v, sp, nlc.affine(1.0))) < 1e-3


@given(st.integers(0, 2**31 - 1), st.floats(1.5, 4.0), st.sampled_from([0.75, 1.0]))
def test_weak_residual_at_phi_identity(seed, p, alpha):
    g = build_grid(1.0, 65)
    sp = space(p, alpha, grid=g)
    nl = nlc.resonant_sine(2.0, p, 0.3)
    phi = GridFunction(g, random_bz(g, np.random.default_rng(seed)))
    from psiplap.energy import derivative_cells

    d = derivative_cells(phi, sp)
    direct = float(np.dot(g.du, np.abs(d) ** p)) - float(np.dot(g.trapezoid_weights, nl.value(g.nodes, phi.values)
                                                                  * phi.values))
    assert weak_residual(phi, phi, sp, nl) == pytest.approx(direct, rel=1e-12, abs=1e-12)


def test_weak_residual_matches_gradient_entries():
    g = build_grid(1.0, 33)
    sp = space(3.0, 0.8, grid=g)
    nl = nlc.power(2.0, 3.0)
    phi = GridFunction(g, random_bz(g, np.random.default_rng(3)))
    grad = energy_gradient(phi, sp, nl).values
    for i in (1, 10, 31):
        assert weak_residual(phi, hat(g, i), sp, nl) == pytest.approx(grad[i], rel=1e-12, abs=1e-14)


def test_weak_residual_test_function_must_vanish():
    g = build_grid(1.0, 9)
    with pytest.raises(BoundaryError):
        weak_residual(GridFunction.zeros(g), GridFunction.from_callable(g, np.ones_like), space(2.0, 1.0), nlc.zero())


def test_gradient_zero():
    g = build_grid(1.0, 33)
    assert np.all(energy_gradient(GridFunction.zeros(g), space(2.0, 0.8, grid=g), nlc.linear(2.0)).values == 0)


@pytest.mark.parametrize("p,alpha", [(2.0, 1.0), (3.0, 0.75), (2.5, 0.9)])
def test_gradient_central_differences(p, alpha):
    g = build_grid(1.0, 65)
    sp = space(p, alpha, grid=g)
    nl = nlc.resonant_sine(2.0, p, 1.0)
    rng = np.random.default_rng(11)
    phi, v = random_bz(g, rng), random_bz(g, rng)
    gv = float(np.dot(energy_gradient(GridFunction(g, phi), sp, nl).values, v))
    E = lambda w: energy(GridFunction(g, w), sp, nl).total
    hs = (2e-3, 1e-3, 5e-4)
    errs = [abs((E(phi + h * v) - E(phi - h * v)) / (2 * h) - gv) for h in hs]
    orders = np.log(np.array(errs[:-1]) / errs[1:]) / np.log(2.0)
    assert np.all(np.abs(orders - 2.0) < 0.2)
    for h in (1e-4, 1e-5):
        assert abs((E(phi + h * v) - E(phi - h * v)) / (2 * h) - gv) < 10 * h**2 * max(1.0, abs(gv)) + 1e-8


def test_gradient_at_discrete_classical_solution():
    g = build_grid(1.0, 257)
    sp = space(2.0, 1.0, grid=g)
    from psiplap.energy import stiffness_matrix

    K = stiffness_matrix(g, 1.0)
    u = np.zeros(g.n)
    u[1:-1] = np.linalg.solve(K, g.trapezoid_weights[1:-1])
    assert np.max(np.abs(energy_gradient(GridFunction(g, u), sp, nlc.affine(1.0)).values)) < 1e-8


@pytest.mark.parametrize("p,alpha,eps", [(2.0, 0.8, 0.0), (3.0, 1.0, 0.0), (1.5, 0.9, 1e-2)])
def test_hessian_matches_gradient_differences(p, alpha, eps):
    g = build_grid(1.0, 33)
    sp = space(p, alpha, grid=g)
    nl = nlc.resonant_sine(1.0, p, 0.5)
    rng = np.random.default_rng(5)
    phi, v = random_bz(g, rng), random_bz(g, rng)
    H = energy_hessian(GridFunction(g, phi), sp, nl, eps)
    h = 1e-6
    fd = (gradient_values(phi + h * v, g, sp, nl, eps) - gradient_values(phi - h * v, g, sp, nl, eps)) / (2 * h)
    np.testing.assert_allclose(H @ v[1:-1], fd[1:-1], rtol=1e-5, atol=1e-6 * np.max(np.abs(fd)))


def test_secant_hessian_reproduces_flux():
    g = build_grid(1.0, 33)
    sp = space(1.5, 1.0, grid=g)
    phi = GridFunction(g, random_bz(g, np.random.default_rng(2)))
    S = energy_hessian(phi, sp, nlc.zero(), secant=True)
    # the lagged-diffusion matrix applied to phi reproduces the kinetic gradient
    np.testing.assert_allclose(S @ phi.values[1:-1], gradient_values(phi.values, g, sp, nlc.zero())[1:-1],
                               rtol=1e-10, atol=1e-12)


@given(st.floats(-10, 10), st.floats(1.1, 5.0))
def test_flux_is_odd_and_homogeneous(x, p):
    a = float(flux(np.array([x]), p)[0])
    assert float(flux(np.array([-x]), p)[0]) == -a
    assert float(flux(np.array([2 * x]), p)[0]) == pytest.approx(2 ** (p - 1) * a, rel=1e-12, abs=1e-300)
