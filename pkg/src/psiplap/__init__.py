"""Numerical toolkit for psi-Hilfer fractional p-Laplacian boundary value problems."""

from __future__ import annotations

from .coordinate_map import Grid, PsiMap, build_grid
from .eigen import EigenEstimate, eigen_residual, lambda_1, lambda_2_estimate, rayleigh_quotient
from .energy import EnergyBreakdown, energy, energy_gradient, weak_residual
from .errors import (
    BoundaryError,
    ConfigError,
    DegenerateInputError,
    DomainError,
    GridError,
    InvalidMapError,
    NumericError,
    ParameterError,
    PsiPlapError,
)
from .fractional_operators import (
    FractionalOrder,
    GridFunction,
    caputo_hilfer_right,
    frac_integral_left,
    frac_integral_right,
    hilfer_deriv_left,
    hilfer_deriv_right,
    ibp_hilfer_defect,
    ibp_integral_defect,
)
from .function_spaces import SpaceParams, hspace_norm, lp_norm
from .hypotheses import HypothesisConfig, audit_theorem
from .nonlinearity import Nonlinearity, primitive_F, theta
from .solver import SolveOptions, SolveReport, find_critical_point, ps_diagnostics

__version__ = "0.1.0"
