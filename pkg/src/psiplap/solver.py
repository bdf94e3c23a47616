"""Critical points of the discrete Euler energy.

The default iteration is a damped Newton method on the interior nodal
values.  Steps are accepted by an Armijo test on the energy whenever the
Newton direction is a descent direction; otherwise (near saddle points, which
are the typical critical points here) they are accepted by sufficient
decrease of the squared gradient norm.  Plain, diagonally preconditioned and
Sobolev-preconditioned gradient descent are available for comparison, as is
a secant (lagged-weight) direction whose kinetic part majorizes the energy
for ``p < 2``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .coordinate_map import Grid
from .energy import energy, energy_hessian, gradient_values, stiffness_matrix
from .errors import GridError, NumericError, ParameterError
from .fractional_operators import GridFunction
from .function_spaces import SpaceParams, check_boundary, hspace_norm
from .nonlinearity import Nonlinearity

STEP_RULES = ("armijo_backtracking", "fixed")
DIRECTIONS = ("gradient", "diagonal", "sobolev", "secant", "newton")


@dataclass(frozen=True)
class SolveOptions:
    max_iter: int = 200
    grad_tol: float = 1e-8
    step_rule: str = "armijo_backtracking"
    initial_step: float = 1.0
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    seed: int = 0
    direction: str = "newton"
    regularization_eps: float = 0.0
    max_backtracks: int = 60

    def __post_init__(self) -> None:
        if not self.grad_tol > 0:
            raise ParameterError(f"grad_tol must be positive, got {self.grad_tol!r}")
        if not 0 < self.armijo_c < 1:
            raise ParameterError(f"armijo_c must lie in (0, 1), got {self.armijo_c!r}")
        if not 0 < self.armijo_shrink < 1:
            raise ParameterError(f"armijo_shrink must lie in (0, 1), got {self.armijo_shrink!r}")
        if not self.initial_step > 0:
            raise ParameterError(f"initial_step must be positive, got {self.initial_step!r}")
        if self.max_iter < 0:
            raise ParameterError(f"max_iter must be non-negative, got {self.max_iter!r}")
        if self.step_rule not in STEP_RULES:
            raise ParameterError(f"step_rule must be one of {STEP_RULES}, got {self.step_rule!r}")
        if self.direction not in DIRECTIONS:
            raise ParameterError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if self.regularization_eps < 0:
            raise ParameterError(f"regularization_eps must be >= 0, got {self.regularization_eps!r}")


@dataclass(frozen=True)
class SolveReport:
    """Iterate history of one solve.

    Traces have one entry per iterate, the initial guess included, so they
    are ``iterations + 1`` long.  ``merit_steps`` counts steps accepted on
    the gradient norm rather than on the energy.
    """

    solution: GridFunction
    energy_trace: np.ndarray
    grad_norm_trace: np.ndarray
    critical_level_c: float
    rho_trace: np.ndarray
    converged: bool
    iterations: int
    stop_reason: str = ""
    step_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    theta_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    pairing_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    merit_steps: int = 0

    @property
    def final_grad_norm(self) -> float:
        return float(self.grad_norm_trace[-1])


def grad_norm(g: np.ndarray, grid: Grid) -> float:
    """Euclidean norm of the interior gradient divided by the root of the mean spacing."""
    return float(np.linalg.norm(g[1:-1])) / math.sqrt(grid.h)


def default_init(grid: Grid, eigenfunction: GridFunction | None = None, scale: float = 1.0) -> GridFunction:
    """Scaled eigenfunction when given, else the parabola with peak ``scale`` in psi-coordinates."""
    if eigenfunction is not None:
        v = eigenfunction.values
        peak = float(np.max(np.abs(v)))
        if peak == 0.0:
            raise ParameterError("eigenfunction initial guess is identically zero")
        return GridFunction(grid, scale * v / peak)
    u = grid.u
    span = u[-1]
    vals = 4.0 * scale * u * (span - u) / span**2
    vals[0] = vals[-1] = 0.0
    return GridFunction(grid, vals)


def random_init(grid: Grid, rng: np.random.Generator, modes: int = 6, scale: float = 1.0) -> GridFunction:
    """Smooth random Fourier-sine combination, boundary-zero."""
    u = grid.u / grid.u[-1]
    coef = rng.standard_normal(modes) / np.arange(1, modes + 1)
    vals = scale * np.sin(np.pi * np.outer(u, np.arange(1, modes + 1))) @ coef
    vals[0] = vals[-1] = 0.0
    return GridFunction(grid, vals)


class _Problem:
    """Energy, gradient and Hessian on a fixed grid, in nodal arrays."""

    def __init__(self, sp: SpaceParams, nl: Nonlinearity, grid: Grid, eps: float) -> None:
        self.sp, self.nl, self.grid, self.eps = sp, nl, grid, eps

    def energy(self, v: np.ndarray) -> float:
        return energy(GridFunction(self.grid, v), self.sp, self.nl, self.eps).total

    def gradient(self, v: np.ndarray) -> np.ndarray:
        return gradient_values(v, self.grid, self.sp, self.nl, self.eps)

    def hessian(self, v: np.ndarray, secant: bool = False) -> np.ndarray:
        return energy_hessian(GridFunction(self.grid, v), self.sp, self.nl, self.eps, secant=secant)

    def theta_integral(self, v: np.ndarray) -> float:
        return float(np.dot(self.grid.trapezoid_weights, self.nl.theta(self.grid.nodes, v)))


def _direction(kind: str, prob: _Problem, v: np.ndarray, g: np.ndarray) -> np.ndarray:
    gi = g[1:-1]
    if kind == "gradient":
        di = -gi
    elif kind == "diagonal":
        di = -gi / np.diag(stiffness_matrix(prob.grid, prob.sp.alpha))
    elif kind == "sobolev":
        di = -np.linalg.solve(stiffness_matrix(prob.grid, prob.sp.alpha), gi)
    elif kind == "secant":
        di = -np.linalg.solve(prob.hessian(v, secant=True), gi)
    else:
        try:
            di = -np.linalg.solve(prob.hessian(v), gi)
        except np.linalg.LinAlgError:
            di = -np.linalg.solve(stiffness_matrix(prob.grid, prob.sp.alpha), gi)
        if not np.all(np.isfinite(di)):
            di = -np.linalg.solve(stiffness_matrix(prob.grid, prob.sp.alpha), gi)
    d = np.zeros_like(v)
    d[1:-1] = di
    return d


def _finite_energy(prob: _Problem, v: np.ndarray, iteration: int) -> float:
    try:
        e = prob.energy(v)
    except NumericError as exc:
        raise NumericError(f"iteration {iteration}: {exc}") from exc
    if not math.isfinite(e):
        raise NumericError(f"iteration {iteration}: energy is not finite ({e!r})")
    return e


def find_critical_point(
    sp: SpaceParams, nl: Nonlinearity, grid: Grid, init: GridFunction, opts: SolveOptions = SolveOptions()
) -> SolveReport:
    """Iterate from ``init`` until the scaled gradient norm drops to ``opts.grad_tol``."""
    sp.require_admissible_order()
    if init.grid is not grid:
        raise GridError("initial guess lives on a different grid")
    check_boundary(init)
    prob = _Problem(sp, nl, grid, opts.regularization_eps)

    v = init.values.copy()
    v[0] = v[-1] = 0.0
    e = _finite_energy(prob, v, 0)
    g = prob.gradient(v)
    gn = grad_norm(g, grid)

    energies, gnorms, rhos, steps, thetas, pairings = [e], [gn], [], [], [], []

    def record_state(vals: np.ndarray, grad: np.ndarray) -> None:
        rho = hspace_norm(GridFunction(grid, vals), sp) if np.any(vals) else 0.0
        rhos.append(rho)
        thetas.append(prob.theta_integral(vals))
        pairings.append(float(np.dot(grad, vals)))

    record_state(v, g)
    merit_steps = 0
    it = 0
    stop = "grad_tol" if gn <= opts.grad_tol else "max_iter"
    while gn > opts.grad_tol and it < opts.max_iter:
        d = _direction(opts.direction, prob, v, g)
        slope = float(np.dot(g, d))
        s = opts.initial_step
        accepted = False
        used_merit = False
        if opts.step_rule == "fixed":
            cand = v + s * d
            e_new = _finite_energy(prob, cand, it + 1)
            accepted = True
        elif slope < 0:
            for _ in range(opts.max_backtracks):
                cand = v + s * d
                e_new = _finite_energy(prob, cand, it + 1)
                if e_new <= e + opts.armijo_c * s * slope:
                    accepted = True
                    break
                s *= opts.armijo_shrink
        if not accepted and opts.direction == "newton":
            # saddle region: accept on decrease of the squared gradient norm
            d = _direction("newton", prob, v, g)
            m0 = float(np.dot(g, g))
            s = opts.initial_step
            for _ in range(opts.max_backtracks):
                cand = v + s * d
                g_c = prob.gradient(cand)
                if float(np.dot(g_c, g_c)) <= (1.0 - 2.0 * opts.armijo_c * s) * m0:
                    e_new = _finite_energy(prob, cand, it + 1)
                    accepted = used_merit = True
                    break
                s *= opts.armijo_shrink
        if not accepted:
            stop = "line_search_failed"
            break
        it += 1
        merit_steps += used_merit
        v = cand
        v[0] = v[-1] = 0.0
        e = e_new
        g = prob.gradient(v)
        gn = grad_norm(g, grid)
        energies.append(e)
        gnorms.append(gn)
        steps.append(s)
        record_state(v, g)
        if gn <= opts.grad_tol:
            stop = "grad_tol"
    return SolveReport(
        solution=GridFunction(grid, v),
        energy_trace=np.array(energies),
        grad_norm_trace=np.array(gnorms),
        critical_level_c=float(e),
        rho_trace=np.array(rhos),
        converged=bool(gn <= opts.grad_tol),
        iterations=it,
        stop_reason=stop,
        step_trace=np.array(steps),
        theta_trace=np.array(thetas),
        pairing_trace=np.array(pairings),
        merit_steps=merit_steps,
    )


def multistart(
    sp: SpaceParams,
    nl: Nonlinearity,
    grid: Grid,
    opts: SolveOptions,
    k: int,
    first: GridFunction | None = None,
    max_workers: int | None = None,
) -> list[SolveReport]:
    """``k`` independent solves: ``first`` (or the default parabola) plus seeded random inits.

    Results come back in start order whatever the thread scheduling.
    """
    if k < 1:
        raise ParameterError(f"multistart count must be >= 1, got {k!r}")
    inits = [first if first is not None else default_init(grid)]
    for child in np.random.SeedSequence(opts.seed).spawn(k - 1):
        inits.append(random_init(grid, np.random.default_rng(child)))
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda init: find_critical_point(sp, nl, grid, init, opts), inits))


def select_report(reports: list[SolveReport]) -> SolveReport:
    """Converged run with the lowest level (first on ties); else the smallest final gradient."""
    done = [r for r in reports if r.converged]
    if done:
        return min(done, key=lambda r: r.critical_level_c)
    return min(reports, key=lambda r: r.final_grad_norm)


@dataclass(frozen=True)
class PSDiagnostics:
    """Palais-Smale style traces of a solve.

    ``ps_ratio_p`` uses ``(E'(phi) phi / p - E(phi)) / rho`` and ``ps_ratio_p2``
    divides the pairing by ``p**2`` instead.  ``theta_average`` is
    ``int psi' Theta(xi, phi_j) / rho_j`` (0 where ``rho_j = 0``).
    """

    energy: np.ndarray
    grad_norm: np.ndarray
    rho: np.ndarray
    theta_average: np.ndarray
    ps_ratio_p: np.ndarray
    ps_ratio_p2: np.ndarray
    final_grad_norm: float
    theta_trends_to_zero: bool
    theta_stabilizing: bool


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=float)
    mask = den > 0
    out[mask] = num[mask] / den[mask]
    return out


def ps_diagnostics(report: SolveReport, sp: SpaceParams, nl: Nonlinearity) -> PSDiagnostics:
    """Assemble the energy, gradient, norm and Theta traces of ``report``."""
    rho = report.rho_trace
    e = report.energy_trace
    theta_avg = _safe_ratio(report.theta_trace, rho)
    ratio_p = _safe_ratio(report.pairing_trace / sp.p - e, rho)
    ratio_p2 = _safe_ratio(report.pairing_trace / sp.p**2 - e, rho)
    mags = np.abs(theta_avg)
    trends = bool(mags[-1] <= 1e-10 or (len(mags) > 2 and mags[-1] < mags[len(mags) // 2] < mags[0]))
    if len(theta_avg) >= 2:
        prev, last = theta_avg[-2], theta_avg[-1]
        stabilizing = bool(abs(last - prev) <= 1e-6 * max(1.0, abs(last)))
    else:
        stabilizing = True
    return PSDiagnostics(
        energy=e.copy(),
        grad_norm=report.grad_norm_trace.copy(),
        rho=rho.copy(),
        theta_average=theta_avg,
        ps_ratio_p=ratio_p,
        ps_ratio_p2=ratio_p2,
        final_grad_norm=report.final_grad_norm,
        theta_trends_to_zero=trends,
        theta_stabilizing=stabilizing,
    )


__all__ = [
    "SolveOptions",
    "SolveReport",
    "PSDiagnostics",
    "find_critical_point",
    "multistart",
    "select_report",
    "ps_diagnostics",
    "default_init",
    "random_init",
    "grad_norm",
    "replace",
]
