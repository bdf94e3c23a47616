"""Weighted Lebesgue norms and the psi-fractional space norm."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coordinate_map import PsiMap
from .errors import BoundaryError, GridError, ParameterError
from .fractional_operators import FractionalOrder, GridFunction, hilfer_deriv_left

BOUNDARY_RTOL = 1e-8


@dataclass(frozen=True)
class SpaceParams:
    """Exponent ``p``, fractional order and coordinate map of a psi-fractional space."""

    p: float
    order: FractionalOrder
    psi: PsiMap

    def __post_init__(self) -> None:
        if not (1.0 < self.p < math.inf):
            raise ParameterError(f"exponent p must satisfy 1 < p < inf, got {self.p!r}")

    @property
    def alpha(self) -> float:
        return self.order.alpha

    @property
    def beta(self) -> float:
        return self.order.beta

    def require_admissible_order(self) -> None:
        """The boundary-value problem needs ``alpha > 1/p``."""
        if not self.order.alpha > 1.0 / self.p:
            raise ParameterError(
                f"order constraint 1/p < alpha violated: alpha={self.order.alpha!r}, 1/p={1.0 / self.p!r}"
            )


def lp_norm(f: GridFunction, p: float, psi: PsiMap) -> float:
    """``(int psi'(xi) |f|^p dxi)^(1/p)`` by the trapezoidal rule in psi-coordinates."""
    if not p >= 1.0:
        raise ParameterError(f"p must be >= 1, got {p!r}")
    if f.grid.psi != psi:
        raise GridError(f"grid was built for {f.grid.psi!r}, norm requested for {psi!r}")
    a = np.abs(f.values)
    scale = float(a.max())
    if scale == 0.0:
        return 0.0
    # scaling avoids overflow of |f|^p for large p
    return scale * float(np.dot(f.grid.trapezoid_weights, (a / scale) ** p)) ** (1.0 / p)


def check_boundary(phi: GridFunction, rtol: float = BOUNDARY_RTOL) -> None:
    """Raise :class:`BoundaryError` unless ``|phi(0)|, |phi(T)| <= rtol * max|phi|``."""
    v = phi.values
    tol = rtol * float(np.max(np.abs(v)))
    if abs(v[0]) > tol or abs(v[-1]) > tol:
        raise BoundaryError("function must vanish on the boundary", float(v[0]), float(v[-1]))


def hspace_seminorm(phi: GridFunction, sp: SpaceParams) -> float:
    """``||D phi||_{L^p_psi}`` with the left psi-Hilfer derivative."""
    check_boundary(phi)
    return lp_norm(hilfer_deriv_left(sp.order, sp.psi, phi), sp.p, sp.psi)


def hspace_norm(phi: GridFunction, sp: SpaceParams) -> float:
    """``||phi||_{L^p_psi} + ||D phi||_{L^p_psi}`` (sum form, boundary-zero ``phi`` only)."""
    check_boundary(phi)
    return lp_norm(phi, sp.p, sp.psi) + lp_norm(hilfer_deriv_left(sp.order, sp.psi, phi), sp.p, sp.psi)


def project_boundary(phi: GridFunction) -> GridFunction:
    """Copy of ``phi`` with both endpoint values set to zero."""
    v = phi.values.copy()
    v[0] = v[-1] = 0.0
    return phi.with_values(v)
