"""Nonlinearities f(xi, t), their primitives F and the defect Theta = F - t f.

A :class:`Nonlinearity` wraps vectorized callables ``f(xi, t)`` and, when
known, ``F(xi, t)`` and ``df/dt``.  The module-level constructors form the
built-in catalog used by the solver, the hypothesis audits and the CLI.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import integrate

from .errors import NumericError, ParameterError

Func2 = Callable[[Any, Any], Any]

PRIMITIVE_ATOL = 1e-10


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """Caratheodory data ``f`` with optional primitive ``F`` and t-derivative ``dfdt``."""

    f: Func2
    F: Func2 | None = None
    dfdt: Func2 | None = None
    catalog_id: str = "custom"
    params: dict = field(default_factory=dict)
    _memo: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def value(self, xi: Any, t: Any) -> np.ndarray:
        xi, t = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(t, dtype=float))
        return np.broadcast_to(np.asarray(self.f(xi, t), dtype=float), t.shape).copy()

    def primitive(self, xi: Any, t: Any) -> np.ndarray:
        xi, t = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(t, dtype=float))
        if self.F is not None:
            return np.broadcast_to(np.asarray(self.F(xi, t), dtype=float), t.shape).copy()
        out = np.empty(t.shape)
        for idx in np.ndindex(t.shape):
            out[idx] = self._quad_primitive(float(xi[idx]), float(t[idx]))
        return out

    def _quad_primitive(self, xi: float, t: float) -> float:
        if t == 0.0:
            return 0.0
        key = (xi, t)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        g = lambda s: float(np.asarray(self.f(np.float64(xi), np.float64(s)), dtype=float))
        val, err, info = integrate.quad(g, 0.0, t, epsabs=PRIMITIVE_ATOL, epsrel=1e-12, limit=200, full_output=True)[:3]
        if not math.isfinite(val) or err > max(PRIMITIVE_ATOL, 1e-12 * abs(val)) * 10:
            raise NumericError(f"primitive F({xi!r}, {t!r}) did not converge (error estimate {err:.3g})")
        with self._lock:
            self._memo[key] = val
        return val

    def theta(self, xi: Any, t: Any) -> np.ndarray:
        t_arr = np.asarray(t, dtype=float)
        return self.primitive(xi, t_arr) - t_arr * self.value(xi, t_arr)

    def derivative_t(self, xi: Any, t: Any) -> np.ndarray:
        """``df/dt``; central differences when no derivative was supplied."""
        xi, t = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(t, dtype=float))
        if self.dfdt is not None:
            return np.broadcast_to(np.asarray(self.dfdt(xi, t), dtype=float), t.shape).copy()
        step = 1e-6 * np.maximum(1.0, np.abs(t))
        return (self.value(xi, t + step) - self.value(xi, t - step)) / (2.0 * step)


def primitive_F(nl: Nonlinearity, xi: float, t: float) -> float:
    """``F(xi, t) = int_0^t f(xi, s) ds``; adaptive quadrature when ``F`` is not supplied."""
    value = float(nl.primitive(xi, t))
    if not math.isfinite(value):
        raise NumericError(f"F({xi!r}, {t!r}) is not finite")
    return value


def theta(nl: Nonlinearity, xi: float, t: float) -> float:
    """``Theta(xi, t) = F(xi, t) - t f(xi, t)``."""
    return float(nl.theta(xi, t))


# ---------------------------------------------------------------------------
# catalog


def _spow(t: np.ndarray, e: float) -> np.ndarray:
    """``|t|^e`` with ``0^e = 0`` for any real ``e`` (the limit for e > 0)."""
    a = np.abs(t)
    with np.errstate(divide="ignore"):
        return np.where(a > 0, a**e, 0.0)


def power(lam: float, p: float) -> Nonlinearity:
    """``f = lam |t|^(p-2) t``, ``F = lam |t|^p / p``."""
    if p <= 1:
        raise ParameterError(f"p must exceed 1, got {p!r}")
    return Nonlinearity(
        f=lambda xi, t: lam * _spow(t, p - 2.0) * t,
        F=lambda xi, t: lam * _spow(t, p) / p,
        dfdt=lambda xi, t: lam * (p - 1.0) * _spow(t, p - 2.0),
        catalog_id="power",
        params={"lambda": lam, "p": p},
    )


def linear(lam: float) -> Nonlinearity:
    """``f = lam t``."""
    return Nonlinearity(
        f=lambda xi, t: lam * t,
        F=lambda xi, t: 0.5 * lam * t * t,
        dfdt=lambda xi, t: lam + 0.0 * t,
        catalog_id="linear",
        params={"lambda": lam},
    )


def affine(c: float) -> Nonlinearity:
    """``f = c`` (a constant load)."""
    return Nonlinearity(
        f=lambda xi, t: c + 0.0 * t,
        F=lambda xi, t: c * t,
        dfdt=lambda xi, t: 0.0 * t,
        catalog_id="affine",
        params={"c": c},
    )


def zero() -> Nonlinearity:
    nl = affine(0.0)
    return Nonlinearity(nl.f, nl.F, nl.dfdt, catalog_id="zero")


def bracket(lam_mid: float, p: float, c: float = 0.0) -> Nonlinearity:
    """``F = lam_mid |t|^p + c t``: a power law placed inside an eigenvalue bracket.

    The linear term ``c t`` only shifts ``F`` by a bounded amount relative to
    the pure power (see :func:`bracket_offset_bound`) and leaves ``Theta``
    equal to ``(1 - p) lam_mid |t|^p``.
    """
    return Nonlinearity(
        f=lambda xi, t: p * lam_mid * _spow(t, p - 2.0) * t + c,
        F=lambda xi, t: lam_mid * _spow(t, p) + c * t,
        dfdt=lambda xi, t: p * (p - 1.0) * lam_mid * _spow(t, p - 2.0),
        catalog_id="bracket",
        params={"lambda": lam_mid, "p": p, "c": c},
    )


def bracket_offset_bound(lam_mid: float, lam_lo: float, lam_hi: float, p: float, c: float) -> float:
    """Smallest constant V with ``lam_lo|t|^p - V <= lam_mid|t|^p + c t <= lam_hi|t|^p + V``.

    Uses ``sup_s (|c| s - k s^p) = (1 - 1/p) |c| (|c| / (k p))^(1/(p-1))`` for ``k > 0``.
    """
    if not lam_lo < lam_mid < lam_hi:
        raise ParameterError(f"need lam_lo < lam_mid < lam_hi, got {lam_lo!r}, {lam_mid!r}, {lam_hi!r}")
    if c == 0.0:
        return 0.0

    def sup(k: float) -> float:
        s = (abs(c) / (k * p)) ** (1.0 / (p - 1.0))
        return (1.0 - 1.0 / p) * abs(c) * s

    return max(sup(lam_mid - lam_lo), sup(lam_hi - lam_mid))


def theta_positive() -> Nonlinearity:
    """``F = -|t| ln(1 + |t|)``, for which ``Theta = t^2 / (1 + |t|)`` and ``Theta/|t| -> 1``."""

    def f(xi, t):
        a = np.abs(t)
        return -np.sign(t) * (np.log1p(a) + a / (1.0 + a))

    return Nonlinearity(
        f=f,
        F=lambda xi, t: -np.abs(t) * np.log1p(np.abs(t)),
        dfdt=lambda xi, t: -(1.0 / (1.0 + np.abs(t)) + 1.0 / (1.0 + np.abs(t)) ** 2),
        catalog_id="theta_positive",
    )


def resonant_sine(lam: float, p: float, a: float = 1.0) -> Nonlinearity:
    """``F = lam |t|^p + a (1 - cos t)``: a power law with a bounded oscillating perturbation."""
    return Nonlinearity(
        f=lambda xi, t: p * lam * _spow(t, p - 2.0) * t + a * np.sin(t),
        F=lambda xi, t: lam * _spow(t, p) + a * (1.0 - np.cos(t)),
        dfdt=lambda xi, t: p * (p - 1.0) * lam * _spow(t, p - 2.0) + a * np.cos(t),
        catalog_id="resonant_sine",
        params={"lambda": lam, "p": p, "a": a},
    )


_EXPR_NAMESPACE = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "log1p", "sqrt", "abs", "sign", "sinh", "cosh", "tanh", "arctan")
}
_EXPR_NAMESPACE.update(pi=np.pi, e=np.e, where=np.where, maximum=np.maximum, minimum=np.minimum)


def from_expression(f_expr: str, F_expr: str | None = None) -> Nonlinearity:
    """Build a nonlinearity from numpy expressions in the variables ``xi`` and ``t``.

    Only a fixed set of elementwise numpy functions is visible to the
    expressions; builtins are not.
    """

    def compile_expr(src: str) -> Func2:
        try:
            code = compile(src, "<nonlinearity>", "eval")
        except SyntaxError as exc:
            raise ParameterError(f"cannot parse expression {src!r}: {exc.msg}") from exc

        def fn(xi, t):
            scope = dict(_EXPR_NAMESPACE, xi=xi, t=t)
            return eval(code, {"__builtins__": {}}, scope)  # noqa: S307

        return fn

    return Nonlinearity(
        f=compile_expr(f_expr),
        F=compile_expr(F_expr) if F_expr else None,
        catalog_id="custom",
        params={"f": f_expr, "F": F_expr or ""},
    )
