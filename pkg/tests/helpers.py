"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from psiplap.coordinate_map import build_grid
from psiplap.fractional_operators import FractionalOrder, GridFunction
from psiplap.function_spaces import SpaceParams


def order_for(alpha: float, beta: float = 0.5) -> FractionalOrder:
    return FractionalOrder.classical() if alpha == 1.0 else FractionalOrder(alpha, beta)


def space(p: float, alpha: float, beta: float = 0.5, grid=None) -> SpaceParams:
    from psiplap.coordinate_map import PsiMap

    return SpaceParams(p, order_for(alpha, beta), grid.psi if grid is not None else PsiMap.identity())


def random_bz(grid, rng: np.random.Generator, modes: int = 5) -> np.ndarray:
    """Random smooth boundary-zero nodal values (sine series with decaying coefficients)."""
    x = grid.u / grid.u[-1]
    k = np.arange(1, modes + 1)
    v = np.sin(np.pi * np.outer(x, k)) @ (rng.normal(size=modes) / k)
    v[0] = v[-1] = 0.0
    return v


def hat(grid, i: int) -> GridFunction:
    v = np.zeros(grid.n)
    v[i] = 1.0
    return GridFunction(grid, v)


def unit_grid(n: int, T: float = 1.0):
    return build_grid(T, n)
