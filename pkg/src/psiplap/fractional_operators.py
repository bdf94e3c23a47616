"""psi-Riemann-Liouville integrals and psi-Hilfer derivatives on a grid.

All operators are dense matrices acting on nodal values.  They are built in
psi-coordinates ``u`` where the psi-fractional integral of order ``alpha`` is
the ordinary Riemann-Liouville integral

    I^alpha f(u) = 1/Gamma(alpha) * int_0^u (u - s)^(alpha - 1) f(s) ds.

Integrals use product-trapezoidal weights: ``f`` is interpolated piecewise
linearly in ``u`` and the kernel is integrated exactly on every cell.  A
derivative followed by an outer integral of order ``gamma > 0`` uses the L1
form (exact integration of the piecewise-constant slope); an outer order of
zero falls back to three-point differences in ``u``.  Right-sided operators
are the left-sided ones on the reflected grid.

Weight matrices are cached on the :class:`~psiplap.coordinate_map.Grid` and
returned read-only, so applying an operator is a pure matrix-vector product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coordinate_map import Grid, PsiMap
from .errors import GridError, NumericError, ParameterError
from .special import gamma

__all__ = [
    "FractionalOrder",
    "GridFunction",
    "IbpTerms",
    "caputo_cell_matrix",
    "caputo_hilfer_right",
    "frac_integral_left",
    "frac_integral_right",
    "hilfer_deriv_left",
    "hilfer_deriv_right",
    "hilfer_matrix",
    "ibp_hilfer_defect",
    "ibp_hilfer_terms",
    "ibp_integral_defect",
    "integral_matrix",
]


@dataclass(frozen=True)
class FractionalOrder:
    """Order ``alpha`` and type ``beta`` of a psi-Hilfer derivative.

    ``alpha == 1`` is accepted and selects the classical first derivative.
    """

    alpha: float
    beta: float
    gamma1: float = field(init=False, repr=False)
    gamma2: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError(f"order alpha must lie in (0, 1], got {self.alpha!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ParameterError(f"type beta must lie in [0, 1], got {self.beta!r}")
        object.__setattr__(self, "gamma1", (1.0 - self.beta) * (1.0 - self.alpha))
        object.__setattr__(self, "gamma2", self.beta * (1.0 - self.alpha))

    @classmethod
    def classical(cls) -> FractionalOrder:
        return cls(1.0, 1.0)

    @property
    def is_classical(self) -> bool:
        return self.alpha == 1.0


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal values of a function on a :class:`Grid`.

    ``extrapolated`` lists node indices whose value was obtained by one-sided
    extrapolation (endpoint values of derivatives that are singular there).
    """

    grid: Grid
    values: np.ndarray
    extrapolated: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise GridError(f"expected {self.grid.n} nodal values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NumericError("grid function has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: Grid, f) -> GridFunction:
        """Sample ``f(xi)`` at the grid nodes."""
        return cls(grid, np.broadcast_to(np.asarray(f(grid.nodes), dtype=float), (grid.n,)))

    @classmethod
    def zeros(cls, grid: Grid) -> GridFunction:
        return cls(grid, np.zeros(grid.n))

    def with_values(self, values: np.ndarray) -> GridFunction:
        return GridFunction(self.grid, values)

    def _other(self, other: object) -> np.ndarray | float:
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            return other.values
        return float(other)  # type: ignore[arg-type]

    def __add__(self, other: object) -> GridFunction:
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other: object) -> GridFunction:
        return self.with_values(self.values - self._other(other))

    def __mul__(self, c: float) -> GridFunction:
        return self.with_values(float(c) * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> GridFunction:
        return self.with_values(-self.values)


def _same_grid(f: GridFunction, g: GridFunction) -> None:
    if f.grid is not g.grid:
        raise GridError("grid functions live on different grids")


def _check_map(psi: PsiMap, f: GridFunction) -> None:
    if f.grid.psi != psi:
        raise GridError(f"grid was built for {f.grid.psi!r}, operator called with {psi!r}")


# ---------------------------------------------------------------------------
# weight construction on a bare array of psi-coordinates


def _cell_geometry(x: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distances from evaluation points ``x`` to both ends of every cell.

    Returns ``(a, b, inside)`` with shape ``(len(x), len(u) - 1)`` where
    ``a = x - u_m`` and ``b = x - u_{m+1}`` are clipped at zero and
    ``inside`` marks cells that intersect ``[u_0, x]``.
    """
    a = x[:, None] - u[None, :-1]
    b = x[:, None] - u[None, 1:]
    inside = a > 0
    return np.where(inside, a, 0.0), np.where(b > 0, b, 0.0), inside


def _left_integral_weights(u: np.ndarray, alpha: float) -> np.ndarray:
    """Product-trapezoid matrix of the left integral of order ``alpha`` at the nodes."""
    n = u.size
    if alpha == 0.0:
        return np.eye(n)
    a, b, inside = _cell_geometry(u, u)
    hcell = np.diff(u)[None, :]
    i0 = (a**alpha - b**alpha) / alpha
    i1 = (a ** (alpha + 1) - b ** (alpha + 1)) / (alpha + 1)
    w_left = np.where(inside, (i1 - b * i0) / hcell, 0.0)
    w_right = np.where(inside, (a * i0 - i1) / hcell, 0.0)
    out = np.zeros((n, n))
    out[:, :-1] += w_left
    out[:, 1:] += w_right
    return out / gamma(alpha)


def _slope_weights(x: np.ndarray, u: np.ndarray, order: float) -> np.ndarray:
    """Left integral of order ``order`` of a piecewise-constant function, evaluated at ``x``.

    Entry ``(j, m)`` multiplies the value on cell ``m``.
    """
    a, b, inside = _cell_geometry(x, u)
    w = (a**order - b**order) / gamma(order + 1.0)
    return np.where(inside, w, 0.0)


def _difference_matrix(u: np.ndarray) -> np.ndarray:
    """Cell slopes ``(f_{m+1} - f_m) / h_m`` as an ``(n-1, n)`` matrix."""
    n = u.size
    h = np.diff(u)
    out = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    out[idx, idx] = -1.0 / h
    out[idx, idx + 1] = 1.0 / h
    return out


def _nodal_derivative(u: np.ndarray) -> np.ndarray:
    """Second-order three-point d/du on a non-uniform grid, one-sided at the ends."""
    n = u.size
    out = np.zeros((n, n))
    h1 = u[1:-1] - u[:-2]
    h2 = u[2:] - u[1:-1]
    i = np.arange(1, n - 1)
    out[i, i - 1] = -h2 / (h1 * (h1 + h2))
    out[i, i] = (h2 - h1) / (h1 * h2)
    out[i, i + 1] = h1 / (h2 * (h1 + h2))
    h1, h2 = u[1] - u[0], u[2] - u[1]
    out[0, :3] = [-(2 * h1 + h2) / (h1 * (h1 + h2)), (h1 + h2) / (h1 * h2), -h1 / (h2 * (h1 + h2))]
    h1, h2 = u[-1] - u[-2], u[-2] - u[-3]
    out[-1, -3:] = [h1 / (h2 * (h1 + h2)), -(h1 + h2) / (h1 * h2), (2 * h1 + h2) / (h1 * (h1 + h2))]
    return out


def _hilfer_left_weights(u: np.ndarray, outer: float, inner: float) -> np.ndarray:
    """Matrix of ``I^outer d/du I^inner`` (left-sided) at the nodes."""
    inner_mat = _left_integral_weights(u, inner)
    if outer == 0.0:
        return _nodal_derivative(u) @ inner_mat
    out = np.zeros((u.size, u.size))
    out[:, :] = _slope_weights(u, u, outer) @ _difference_matrix(u) @ inner_mat
    # Node 0 carries an empty integral; replace it by linear extrapolation
    # from nodes 1 and 2, which is what a singular endpoint allows.
    r = (u[1] - u[0]) / (u[2] - u[1])
    out[0] = (1.0 + r) * out[1] - r * out[2]
    return out


def _reflect(mat: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(mat[::-1, ::-1])


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# cached operator matrices on a Grid


def _reflected_u(grid: Grid) -> np.ndarray:
    return grid.cached("u_reflected", lambda: _frozen(grid.u[-1] - grid.u[::-1]))


def integral_matrix(grid: Grid, alpha: float, side: str = "left") -> np.ndarray:
    """Read-only weight matrix of the psi-fractional integral of order ``alpha``."""
    if alpha < 0 or not np.isfinite(alpha):
        raise ParameterError(f"integral order must be non-negative, got {alpha!r}")
    if side not in ("left", "right"):
        raise ParameterError(f"side must be 'left' or 'right', got {side!r}")
    alpha = float(alpha)

    def build() -> np.ndarray:
        if side == "left":
            return _frozen(_left_integral_weights(grid.u, alpha))
        return _frozen(_reflect(_left_integral_weights(_reflected_u(grid), alpha)))

    return grid.cached(("integral", side, alpha), build)


def hilfer_matrix(grid: Grid, order: FractionalOrder, side: str = "left", commuted: bool = False) -> np.ndarray:
    """Read-only matrix of a psi-Hilfer derivative at the nodes.

    ``commuted=True`` swaps the two integral orders, which for ``side="right"``
    gives the Hilfer-Caputo operator of the problem's outer derivative.
    """
    if grid.n < 5:
        raise GridError(f"derivative stencils need at least 5 nodes, grid has {grid.n}")
    if order.is_classical:
        outer = inner = 0.0
    elif commuted:
        outer, inner = order.gamma1, order.gamma2
    else:
        outer, inner = order.gamma2, order.gamma1

    def build() -> np.ndarray:
        if side == "left":
            return _frozen(_hilfer_left_weights(grid.u, outer, inner))
        return _frozen(_reflect(_hilfer_left_weights(_reflected_u(grid), outer, inner)))

    return grid.cached(("hilfer", side, outer, inner), build)


def caputo_cell_matrix(grid: Grid, alpha: float) -> np.ndarray:
    """``(n-1, n)`` matrix of ``I^(1-alpha) f'`` at cell midpoints for piecewise-linear ``f``.

    For a function with ``f(0) = 0`` the left psi-Hilfer derivative equals
    ``I^(1-alpha) f'`` for every type ``beta`` (the two integrals merge by the
    semigroup law), so this matrix is the exact derivative of the
    piecewise-linear interpolant, sampled at the cell midpoints.  With
    ``alpha == 1`` it reduces to the cell slopes.
    """
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha!r}")

    def build() -> np.ndarray:
        slopes = _difference_matrix(grid.u)
        if alpha == 1.0:
            return _frozen(slopes)
        return _frozen(_slope_weights(grid.cell_midpoints, grid.u, 1.0 - alpha) @ slopes)

    return grid.cached(("caputo_cells", float(alpha)), build)


# ---------------------------------------------------------------------------
# public operators


def frac_integral_left(alpha: float, psi: PsiMap, f: GridFunction) -> GridFunction:
    """Left psi-Riemann-Liouville integral of order ``alpha`` from ``xi = 0``."""
    _check_map(psi, f)
    return GridFunction(f.grid, integral_matrix(f.grid, alpha, "left") @ f.values)


def frac_integral_right(alpha: float, psi: PsiMap, f: GridFunction) -> GridFunction:
    """Right psi-Riemann-Liouville integral of order ``alpha`` up to ``xi = T``."""
    _check_map(psi, f)
    return GridFunction(f.grid, integral_matrix(f.grid, alpha, "right") @ f.values)


def hilfer_deriv_left(order: FractionalOrder, psi: PsiMap, f: GridFunction) -> GridFunction:
    """Left psi-Hilfer derivative ``I^(beta(1-alpha)) d/du I^((1-beta)(1-alpha)) f``."""
    _check_map(psi, f)
    mat = hilfer_matrix(f.grid, order, "left")
    return GridFunction(f.grid, mat @ f.values, extrapolated=(0,))


def hilfer_deriv_right(order: FractionalOrder, psi: PsiMap, f: GridFunction) -> GridFunction:
    """Right psi-Hilfer derivative ``I_T^(beta(1-alpha)) (-d/du) I_T^((1-beta)(1-alpha)) f``."""
    _check_map(psi, f)
    mat = hilfer_matrix(f.grid, order, "right")
    return GridFunction(f.grid, mat @ f.values, extrapolated=(f.grid.n - 1,))


def caputo_hilfer_right(order: FractionalOrder, psi: PsiMap, g: GridFunction) -> GridFunction:
    """Right Hilfer-Caputo derivative ``I_T^((1-beta)(1-alpha)) (-d/du) I_T^(beta(1-alpha)) g``."""
    _check_map(psi, g)
    mat = hilfer_matrix(g.grid, order, "right", commuted=True)
    return GridFunction(g.grid, mat @ g.values, extrapolated=(g.grid.n - 1,))


def ibp_integral_defect(alpha: float, psi: PsiMap, phi: GridFunction, phi2: GridFunction) -> float:
    """Discrete defect of the fractional integration-by-parts identity.

    Returns ``int (I_0^alpha phi2) phi du - int phi2 (I_T^alpha phi) du``;
    both integrals use the trapezoidal rule in psi-coordinates.
    """
    _same_grid(phi, phi2)
    _check_map(psi, phi)
    grid = phi.grid
    w = grid.trapezoid_weights
    lhs = float(np.dot(w, (integral_matrix(grid, alpha, "left") @ phi2.values) * phi.values))
    rhs = float(np.dot(w, phi2.values * (integral_matrix(grid, alpha, "right") @ phi.values)))
    return lhs - rhs


@dataclass(frozen=True)
class IbpTerms:
    """Terms of the Hilfer integration-by-parts identity.

    The identity reads ``lhs == boundary_right + boundary_left + rhs_integral``;
    ``defect`` is the difference and ``truncated_defect = lhs - rhs_integral``
    is what remains when both boundary terms are dropped.
    """

    lhs: float
    rhs_integral: float
    boundary_right: float
    boundary_left: float

    @property
    def defect(self) -> float:
        return self.lhs - (self.boundary_right + self.boundary_left + self.rhs_integral)

    @property
    def truncated_defect(self) -> float:
        return self.lhs - self.rhs_integral


def ibp_hilfer_terms(order: FractionalOrder, psi: PsiMap, phi: GridFunction, phi2: GridFunction) -> IbpTerms:
    """All terms of the Hilfer-Caputo / Hilfer integration by parts on ``[0, T]``.

    The boundary limits are the endpoint nodal values of
    ``I_0^((1-beta)(1-alpha)) phi2 * I_T^(beta(1-alpha)) phi``.
    """
    _same_grid(phi, phi2)
    _check_map(psi, phi)
    grid = phi.grid
    w = grid.trapezoid_weights
    lhs = float(np.dot(w, (hilfer_matrix(grid, order, "right", commuted=True) @ phi.values) * phi2.values))
    rhs = float(np.dot(w, phi.values * (hilfer_matrix(grid, order, "left") @ phi2.values)))
    g1, g2 = (0.0, 0.0) if order.is_classical else (order.gamma1, order.gamma2)
    left_part = integral_matrix(grid, g1, "left") @ phi2.values
    right_part = integral_matrix(grid, g2, "right") @ phi.values
    return IbpTerms(
        lhs=lhs,
        rhs_integral=rhs,
        boundary_right=-float(left_part[-1] * right_part[-1]),
        boundary_left=float(left_part[0] * right_part[0]),
    )


def ibp_hilfer_defect(order: FractionalOrder, psi: PsiMap, phi: GridFunction, phi2: GridFunction) -> float:
    """Defect of the Hilfer integration-by-parts identity, boundary terms included."""
    return ibp_hilfer_terms(order, psi, phi, phi2).defect
