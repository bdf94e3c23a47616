"""Variational eigenvalues of the fractional p-Laplacian.

Everything uses the same discretization as :mod:`psiplap.energy`, so the
Rayleigh quotient here is

    R(phi) = sum_k du_k |D phi|_k^p / sum_i w_i |phi_i|^p

with ``D`` the cell-midpoint Hilfer derivative and ``w`` trapezoid weights.

``lambda_1`` runs nonlinear inverse power iteration (each step is a convex
p-Laplacian solve) and then polishes the eigenpair with a bordered Newton
method.  ``lambda_2_estimate`` takes the smallest value of
``max_theta R(cos(theta) w1 + sin(theta) w2)`` over two families of pairs:

* ``nodal``: ``w1``, ``w2`` are first eigenfunctions restricted to
  ``[0, c]`` and ``[c, T]``, with the split node ``c`` chosen by bisection
  to balance the two restricted eigenvalues;
* ``span``: ``w1`` is the first eigenfunction and ``w2`` the sign-changing
  eigenfunction obtained by polishing the best nodal combination.

For p = 2 all of this reduces to a generalized symmetric eigenproblem, which
is used for initial guesses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from .coordinate_map import Grid
from .energy import _flux_slope, flux, stiffness_matrix
from .errors import DegenerateInputError, GridError, NumericError, ParameterError
from .fractional_operators import GridFunction, caputo_cell_matrix
from .function_spaces import SpaceParams, check_boundary, lp_norm
from .solver import SolveOptions

THETA_SAMPLES = 64


@dataclass(frozen=True)
class EigenEstimate:
    """An approximate eigenpair.

    ``lam`` is the reported eigenvalue (for level 2 the minimax upper bound);
    ``eigenfunction_lambda`` is the Rayleigh quotient of ``eigenfunction``,
    which is what ``residual`` is measured against.
    """

    lam: float
    eigenfunction: GridFunction
    level: int
    residual: float
    iterations: int
    converged: bool
    upper_bound: bool = False
    eigenfunction_lambda: float = math.nan
    family: str = ""


def _spow(x: np.ndarray, e: float) -> np.ndarray:
    a = np.abs(x)
    with np.errstate(divide="ignore"):
        return np.where(a > 0, a**e, 0.0)


class _Operator:
    """Discrete numerator/denominator of the Rayleigh quotient and their derivatives."""

    def __init__(self, sp: SpaceParams, grid: Grid) -> None:
        sp.require_admissible_order()
        self.p = sp.p
        self.grid = grid
        self.mat = caputo_cell_matrix(grid, sp.alpha)
        self.du = grid.du
        self.w = grid.trapezoid_weights
        self.alpha = sp.alpha

    def numerator(self, v: np.ndarray) -> float:
        return float(np.dot(self.du, np.abs(self.mat @ v) ** self.p))

    def denominator(self, v: np.ndarray) -> float:
        return float(np.dot(self.w, np.abs(v) ** self.p))

    def quotient(self, v: np.ndarray) -> float:
        den = self.denominator(v)
        if den == 0.0:
            raise DegenerateInputError("Rayleigh quotient of the zero function")
        return self.numerator(v) / den

    def kinetic_grad(self, v: np.ndarray) -> np.ndarray:
        """Gradient of ``numerator / p``."""
        return self.mat.T @ (self.du * flux(self.mat @ v, self.p))

    def kinetic_hess(self, v: np.ndarray, free: np.ndarray, secant: bool = False) -> np.ndarray:
        m = self.mat[:, free]
        x = self.mat @ v
        slope = _flux_slope(x, self.p, 0.0)
        if secant:
            slope = slope / (self.p - 1.0)
        return m.T @ ((self.du * slope)[:, None] * m)

    def mass_grad(self, v: np.ndarray) -> np.ndarray:
        """Gradient of ``denominator / p``."""
        return self.w * _spow(v, self.p - 1.0) * np.sign(v)

    def normalize(self, v: np.ndarray) -> np.ndarray:
        den = self.denominator(v)
        if den == 0.0:
            raise DegenerateInputError("cannot normalize the zero function")
        return v / den ** (1.0 / self.p)

    def residual(self, v: np.ndarray, lam: float, free: np.ndarray | None = None) -> float:
        r = self.kinetic_grad(v) - lam * self.mass_grad(v)
        idx = free if free is not None else slice(1, -1)
        return float(np.max(np.abs(r[idx]), initial=0.0))


def _interior(grid: Grid) -> np.ndarray:
    return np.arange(1, grid.n - 1)


def rayleigh_quotient(phi: GridFunction, sp: SpaceParams) -> float:
    """``||D phi||_p^p / ||phi||_p^p`` in the energy discretization."""
    check_boundary(phi)
    return _Operator(sp, phi.grid).quotient(phi.values)


def eigen_residual(phi: GridFunction, lam: float, sp: SpaceParams) -> float:
    """``max_i |<|D phi|^(p-2) D phi, D e_i> - lam <|phi|^(p-2) phi, e_i>|`` over interior hats ``e_i``."""
    if phi.grid.psi != sp.psi:
        raise GridError(f"grid was built for {phi.grid.psi!r}, space uses {sp.psi!r}")
    check_boundary(phi)
    return _Operator(sp, phi.grid).residual(phi.values, lam)


# ---------------------------------------------------------------------------
# p = 2 initial guesses


def _linear_modes(sp: SpaceParams, grid: Grid, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Lowest ``count`` eigenpairs of the p = 2 pencil (full-length nodal vectors)."""
    k = stiffness_matrix(grid, sp.alpha)
    vals, vecs = linalg.eigh(k, np.diag(grid.trapezoid_weights[1:-1]), subset_by_index=[0, count - 1])
    full = np.zeros((grid.n, count))
    full[1:-1] = vecs
    return vals, full


# ---------------------------------------------------------------------------
# first eigenpair on a set of free nodes


def _solve_plap(op: _Operator, rhs: np.ndarray, start: np.ndarray, free: np.ndarray, tol: float) -> np.ndarray:
    """Minimize ``numerator(w)/p - <rhs, w>`` over ``w`` supported on ``free``."""
    secant = op.p < 2.0
    w = start.copy()

    def obj(x: np.ndarray) -> float:
        return op.numerator(x) / op.p - float(np.dot(rhs, x))

    scale = float(np.max(np.abs(rhs[free]), initial=0.0)) or 1.0
    val = obj(w)
    for _ in range(100):
        g = op.kinetic_grad(w)[free] - rhs[free]
        if np.max(np.abs(g)) <= tol * scale:
            break
        h = op.kinetic_hess(w, free, secant=secant)
        d = -np.linalg.solve(h, g)
        slope = float(np.dot(g, d))
        if slope >= 0:
            d, slope = -g, -float(np.dot(g, g))
        s = 1.0
        for _ in range(60):
            cand = w.copy()
            cand[free] += s * d
            cv = obj(cand)
            if cv <= val + 1e-4 * s * slope:
                break
            s *= 0.5
        else:
            break
        w, val = cand, cv
    return w


def _bordered_newton(
    op: _Operator, v: np.ndarray, lam: float, free: np.ndarray, tol: float, max_iter: int = 50
) -> tuple[np.ndarray, float, bool, int]:
    """Newton on ``(K(v) - lam B(v) = 0, ||v||_p^p = 1)`` restricted to ``free`` nodes."""
    p = op.p
    v = op.normalize(v)

    def system(x: np.ndarray, mu: float) -> np.ndarray:
        r = (op.kinetic_grad(x) - mu * op.mass_grad(x))[free]
        return np.append(r, (op.denominator(x) - 1.0) / p)

    f = system(v, lam)
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(f[:-1])) <= tol and abs(f[-1]) <= 1e-13:
            return v, lam, True, it - 1
        b = op.mass_grad(v)[free]
        a = op.kinetic_hess(v, free)
        a[np.diag_indices_from(a)] -= lam * (p - 1.0) * op.w[free] * _spow(v[free], p - 2.0)
        m = len(free)
        jac = np.zeros((m + 1, m + 1))
        jac[:m, :m] = a
        jac[:m, m] = -b
        jac[m, :m] = b
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            return v, lam, False, it
        if not np.all(np.isfinite(step)):
            return v, lam, False, it
        base = float(np.linalg.norm(f))
        s = 1.0
        for _ in range(40):
            cand = v.copy()
            cand[free] += s * step[:-1]
            mu = lam + s * step[-1]
            fc = system(cand, mu)
            if np.linalg.norm(fc) <= (1.0 - 1e-4 * s) * base:
                break
            s *= 0.5
        else:
            return v, lam, False, it
        v, lam, f = cand, mu, fc
    ok = bool(np.max(np.abs(f[:-1])) <= tol and abs(f[-1]) <= 1e-13)
    return v, lam, ok, max_iter


def _first_pair(
    op: _Operator, start: np.ndarray, free: np.ndarray, tol: float, max_iter: int
) -> tuple[np.ndarray, float, bool, int]:
    """First eigenpair among functions supported on ``free``: inverse iteration, then Newton polish."""
    v = np.zeros(op.grid.n)
    v[free] = np.abs(start[free])
    v = op.normalize(v)
    lam = op.quotient(v)
    iters = 0
    for iters in range(1, max_iter + 1):
        rhs = op.mass_grad(v)
        w = _solve_plap(op, rhs, v, free, 1e-12)
        w = op.normalize(w)
        new = op.quotient(w)
        done = abs(new - lam) <= 1e-9 * new
        v, lam = w, new
        if done:
            break
    v, lam, ok, k = _bordered_newton(op, v, lam, free, tol)
    if not ok:
        # fall back to the inverse-iteration result
        v = op.normalize(v)
        lam = op.quotient(v)
    if float(np.sum(op.w * v)) < 0:
        v = -v
    return v, lam, ok, iters + k


def _as_estimate(
    op: _Operator, v: np.ndarray, lam: float, level: int, iters: int, tol: float, **extra
) -> EigenEstimate:
    if not lam > 0:
        raise NumericError(f"non-positive eigenvalue estimate {lam!r}")
    res = op.residual(v, extra.get("eigenfunction_lambda", lam))
    extra.setdefault("eigenfunction_lambda", lam)
    return EigenEstimate(
        lam=float(lam),
        eigenfunction=GridFunction(op.grid, v),
        level=level,
        residual=res,
        iterations=iters,
        converged=bool(res <= tol),
        **extra,
    )


def lambda_1(sp: SpaceParams, grid: Grid, opts: SolveOptions = SolveOptions()) -> EigenEstimate:
    """Smallest variational eigenvalue and its one-signed eigenfunction."""
    op = _Operator(sp, grid)
    _, modes = _linear_modes(sp, grid, 1)
    v, lam, _, iters = _first_pair(op, modes[:, 0], _interior(grid), opts.grad_tol, opts.max_iter)
    return _as_estimate(op, v, lam, 1, iters, opts.grad_tol)


def _max_on_circle(op: _Operator, w1: np.ndarray, w2: np.ndarray) -> tuple[float, float]:
    """``max_theta R(cos theta w1 + sin theta w2)`` and the maximizing angle."""

    def r(theta: float) -> float:
        return op.quotient(math.cos(theta) * w1 + math.sin(theta) * w2)

    thetas = np.linspace(0.0, math.pi, THETA_SAMPLES, endpoint=False)
    vals = np.array([r(t) for t in thetas])
    k = int(np.argmax(vals))
    step = math.pi / THETA_SAMPLES
    res = optimize.minimize_scalar(
        lambda t: -r(t), bounds=(thetas[k] - step, thetas[k] + step), method="bounded", options={"xatol": 1e-10}
    )
    if -res.fun > vals[k]:
        return float(-res.fun), float(res.x)
    return float(vals[k]), float(thetas[k])


def _nodal_family(op: _Operator, start: np.ndarray, tol: float, max_iter: int):
    """Balance the restricted first eigenvalues on ``[0, c]`` and ``[c, T]`` by bisection on ``c``."""
    n = op.grid.n
    cache: dict[int, tuple] = {}

    def pieces(c: int):
        if c not in cache:
            left = np.arange(1, c)
            right = np.arange(c + 1, n - 1)
            vl, ll, _, il = _first_pair(op, start, left, tol, max_iter)
            vr, lr, _, ir = _first_pair(op, start, right, tol, max_iter)
            cache[c] = (vl, ll, vr, lr, il + ir)
        return cache[c]

    lo, hi = 3, n - 4
    # the difference left - right decreases as c grows
    while hi - lo > 1:
        mid = (lo + hi) // 2
        _, ll, _, lr, _ = pieces(mid)
        if ll > lr:
            lo = mid
        else:
            hi = mid
    best = None
    for c in (lo, hi):
        vl, ll, vr, lr, _ = pieces(c)
        peak, theta = _max_on_circle(op, vl, vr)
        if best is None or peak < best[0]:
            best = (peak, theta, vl, vr, c)
    iters = sum(entry[4] for entry in cache.values())
    return best, iters


def lambda_2_estimate(
    sp: SpaceParams, grid: Grid, opts: SolveOptions = SolveOptions(), first: EigenEstimate | None = None
) -> EigenEstimate:
    """Minimax upper bound for the second variational eigenvalue.

    The eigenfunction reported is the polished sign-changing eigenfunction;
    ``residual`` and ``converged`` refer to it.
    """
    if grid.n < 9:
        raise GridError("the second eigenvalue needs at least 9 nodes")
    op = _Operator(sp, grid)
    if first is None:
        first = lambda_1(sp, grid, opts)
    u1 = first.eigenfunction.values
    free = _interior(grid)
    lin_vals, modes = _linear_modes(sp, grid, 2)

    (peak_a, theta_a, vl, vr, _), iters = _nodal_family(op, modes[:, 0], opts.grad_tol, opts.max_iter)
    v0 = math.cos(theta_a) * vl + math.sin(theta_a) * vr
    v, mu, ok, k = _bordered_newton(op, v0, op.quotient(v0), free, opts.grad_tol)
    if not ok or mu <= first.lam * (1.0 + 1e-9):
        # the linear second mode is a second, independent starting point
        v2, mu2, ok2, k2 = _bordered_newton(op, modes[:, 1], op.quotient(modes[:, 1]), free, opts.grad_tol)
        k += k2
        if ok2 and mu2 > first.lam * (1.0 + 1e-9):
            v, mu, ok = v2, mu2, ok2
    iters += k
    if not ok:
        v = op.normalize(v0)
    mu = op.quotient(v)
    candidates = [(peak_a, "nodal")]
    peak_b, _ = _max_on_circle(op, u1, v)
    candidates.append((peak_b, "span"))
    lam, family = min(candidates)
    if v[int(np.argmax(np.abs(v)))] < 0:
        v = -v
    if not lam >= first.lam * (1.0 + 1e-6):
        raise NumericError(f"second eigenvalue estimate {lam!r} does not exceed the first {first.lam!r}")
    est = _as_estimate(op, v, lam, 2, iters, opts.grad_tol, upper_bound=True, eigenfunction_lambda=mu, family=family)
    if not ok:
        est = EigenEstimate(**{**est.__dict__, "converged": False})
    return est


def sign_changes(phi: GridFunction, rtol: float = 1e-8) -> int:
    """Interior sign changes of ``phi``, ignoring values below ``rtol * max|phi|``."""
    v = phi.values[1:-1]
    tol = rtol * float(np.max(np.abs(v), initial=0.0))
    s = np.sign(v[np.abs(v) > tol])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def p_laplacian_eigenvalue(p: float, T: float, level: int = 1) -> float:
    """Classical ``(p-1)(level pi_p / T)^p`` with ``pi_p = 2 pi / (p sin(pi/p))``."""
    if not p > 1:
        raise ParameterError(f"p must exceed 1, got {p!r}")
    pi_p = 2.0 * math.pi / (p * math.sin(math.pi / p))
    return (p - 1.0) * (level * pi_p / T) ** p


__all__ = [
    "EigenEstimate",
    "rayleigh_quotient",
    "eigen_residual",
    "lambda_1",
    "lambda_2_estimate",
    "sign_changes",
    "p_laplacian_eigenvalue",
    "lp_norm",
]
