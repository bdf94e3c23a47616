"""The Euler energy of the fractional p-Laplacian problem and its derivatives.

The discrete energy treats ``phi`` as the piecewise-linear interpolant of its
nodal values in psi-coordinates:

* the kinetic term ``(1/p) int psi' |D phi|^p`` samples the left Hilfer
  derivative at cell midpoints (:func:`~psiplap.fractional_operators.caputo_cell_matrix`)
  and integrates with the midpoint rule;
* the potential term ``int psi' F(xi, phi)`` uses the trapezoidal rule.

Because the gradient is the exact derivative of this discrete energy, the
weak residual against a hat function and the matching gradient entry agree
to rounding, and finite differences of the energy converge to it at
second order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryError, NumericError
from .fractional_operators import GridFunction, _same_grid, caputo_cell_matrix
from .function_spaces import SpaceParams, check_boundary
from .nonlinearity import Nonlinearity


@dataclass(frozen=True)
class EnergyBreakdown:
    """Kinetic and potential parts of the energy; ``total = kinetic - potential``.

    ``singular_cells`` counts cells where ``D phi == 0`` while ``p < 2``.
    """

    kinetic: float
    potential: float
    total: float
    singular_cells: int = 0


def derivative_cells(phi: GridFunction, sp: SpaceParams) -> np.ndarray:
    """Left Hilfer derivative of ``phi`` at the cell midpoints (boundary-zero ``phi``)."""
    return caputo_cell_matrix(phi.grid, sp.alpha) @ phi.values


def flux(x: np.ndarray, p: float, eps: float = 0.0) -> np.ndarray:
    """``(|x|^2 + eps^2)^((p-2)/2) x``, taken as 0 at ``x = 0`` when ``eps = 0``."""
    if eps > 0.0:
        return (x * x + eps * eps) ** ((p - 2.0) / 2.0) * x
    a = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a > 0, a ** (p - 2.0) * x, 0.0)


def _flux_slope(x: np.ndarray, p: float, eps: float) -> np.ndarray:
    """d(flux)/dx, floored away from the singular set so Newton systems stay solvable."""
    if eps > 0.0:
        s = x * x + eps * eps
        return s ** ((p - 4.0) / 2.0) * ((p - 1.0) * x * x + eps * eps)
    a = np.abs(x)
    floor = 1e-8 * max(float(a.max(initial=0.0)), 1e-300)
    return (p - 1.0) * np.maximum(a, floor) ** (p - 2.0)


def _density(x: np.ndarray, p: float, eps: float) -> np.ndarray:
    if eps > 0.0:
        return ((x * x + eps * eps) ** (p / 2.0) - eps**p) / p
    return np.abs(x) ** p / p


def _require_finite(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite {what}")
    return arr


def energy(phi: GridFunction, sp: SpaceParams, nl: Nonlinearity, eps: float = 0.0) -> EnergyBreakdown:
    """Euler energy ``(1/p) int psi'|D phi|^p - int psi' F(xi, phi)`` of a boundary-zero ``phi``."""
    check_boundary(phi)
    grid = phi.grid
    d = derivative_cells(phi, sp)
    kinetic = float(np.dot(grid.du, _density(d, sp.p, eps)))
    F = _require_finite(nl.primitive(grid.nodes, phi.values), "primitive F")
    potential = float(np.dot(grid.trapezoid_weights, F))
    singular = int(np.count_nonzero(d == 0.0)) if sp.p < 2 and eps == 0.0 else 0
    return EnergyBreakdown(kinetic, potential, kinetic - potential, singular)


def weak_residual(
    phi: GridFunction, v: GridFunction, sp: SpaceParams, nl: Nonlinearity, eps: float = 0.0
) -> float:
    """``int psi' |D phi|^(p-2) D phi D v - int psi' f(xi, phi) v`` for a boundary-zero test ``v``."""
    _same_grid(phi, v)
    check_boundary(phi)
    if v.values[0] != 0.0 or v.values[-1] != 0.0:
        raise BoundaryError("test function must vanish on the boundary", float(v.values[0]), float(v.values[-1]))
    grid = phi.grid
    flx = flux(derivative_cells(phi, sp), sp.p, eps)
    dv = derivative_cells(v, sp)
    load = _require_finite(nl.value(grid.nodes, phi.values), "nonlinearity f")
    return float(np.dot(grid.du, flx * dv) - np.dot(grid.trapezoid_weights, load * v.values))


def gradient_values(phi_values: np.ndarray, grid, sp: SpaceParams, nl: Nonlinearity, eps: float = 0.0) -> np.ndarray:
    """Nodal gradient of the discrete energy, boundary entries zeroed."""
    mat = caputo_cell_matrix(grid, sp.alpha)
    flx = flux(mat @ phi_values, sp.p, eps)
    load = _require_finite(nl.value(grid.nodes, phi_values), "nonlinearity f")
    g = mat.T @ (grid.du * flx) - grid.trapezoid_weights * load
    g[0] = g[-1] = 0.0
    return g


def energy_gradient(phi: GridFunction, sp: SpaceParams, nl: Nonlinearity, eps: float = 0.0) -> GridFunction:
    """Entries are the weak residuals against the interior hat functions."""
    check_boundary(phi)
    return GridFunction(phi.grid, gradient_values(phi.values, phi.grid, sp, nl, eps))


def energy_hessian(
    phi: GridFunction, sp: SpaceParams, nl: Nonlinearity, eps: float = 0.0, secant: bool = False
) -> np.ndarray:
    """Hessian of the discrete energy restricted to interior nodes, ``(n-2, n-2)``.

    With ``secant=True`` the kinetic weight is ``flux(x)/x`` instead of
    ``flux'(x)`` (the lagged-diffusion matrix).
    """
    grid = phi.grid
    mat = caputo_cell_matrix(grid, sp.alpha)[:, 1:-1]
    d = caputo_cell_matrix(grid, sp.alpha) @ phi.values
    slope = _flux_slope(d, sp.p, eps)
    if secant:
        slope = slope / (sp.p - 1.0) if eps == 0.0 else (d * d + eps * eps) ** ((sp.p - 2.0) / 2.0)
    h = mat.T @ ((grid.du * slope)[:, None] * mat)
    ft = _require_finite(nl.derivative_t(grid.nodes[1:-1], phi.values[1:-1]), "df/dt")
    h[np.diag_indices_from(h)] -= grid.trapezoid_weights[1:-1] * ft
    return h


def stiffness_matrix(grid, alpha: float) -> np.ndarray:
    """Interior Hessian of ``(1/2) int psi' |D phi|^2``: the p = 2 metric used for preconditioning."""

    def build() -> np.ndarray:
        mat = caputo_cell_matrix(grid, alpha)[:, 1:-1]
        k = mat.T @ (grid.du[:, None] * mat)
        k.setflags(write=False)
        return k

    return grid.cached(("stiffness", float(alpha)), build)
