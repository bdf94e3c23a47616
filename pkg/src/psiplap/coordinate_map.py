"""Monotone coordinate maps psi and discretization grids of [0, T].

Every operator in the package is written in the variable ``u = psi(xi)``:
the weight ``psi'(s) ds`` becomes ``du`` and ``(1/psi') d/dxi`` becomes
``d/du``.  A :class:`Grid` therefore carries both the physical nodes and
their images under psi, and the numerical kernels only ever look at the
latter.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, GridError, InvalidMapError, ParameterError

SPACING_RULES = {
    "uniform_in_xi": "uniform_in_xi",
    "xi": "uniform_in_xi",
    "uniform_in_psi": "uniform_in_psi",
    "psi": "uniform_in_psi",
}

ArrayFunction = Callable[[Any], Any]


class PsiMap:
    """An increasing coordinate function psi with derivative psi'.

    Use the constructors :meth:`identity`, :meth:`power`, :meth:`log` and
    :meth:`custom` rather than calling the class directly.  Instances are
    immutable; built-in kinds compare by value, custom maps by identity.
    """

    __slots__ = ("kind", "rho", "domain", "_f", "_df", "_inv", "name")

    def __init__(
        self,
        kind: str,
        rho: float = 1.0,
        domain: tuple[float, float] = (0.0, math.inf),
        f: ArrayFunction | None = None,
        df: ArrayFunction | None = None,
        inverse: ArrayFunction | None = None,
        name: str = "",
    ) -> None:
        a, b = float(domain[0]), float(domain[1])
        if not a < b:
            raise InvalidMapError(f"empty domain [{a}, {b}]")
        if kind == "power" and not (rho > 0 and math.isfinite(rho)):
            raise InvalidMapError(f"power map needs rho > 0, got {rho!r}")
        if kind == "custom" and (f is None or df is None):
            raise InvalidMapError("custom maps must supply both psi and psi'")
        if kind not in ("identity", "power", "log", "custom"):
            raise InvalidMapError(f"unknown map kind {kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "rho", float(rho) if kind == "power" else 1.0)
        object.__setattr__(self, "domain", (a, b))
        object.__setattr__(self, "_f", f)
        object.__setattr__(self, "_df", df)
        object.__setattr__(self, "_inv", inverse)
        object.__setattr__(self, "name", name or kind)

    def __setattr__(self, key: str, value: Any) -> None:
        raise AttributeError("PsiMap is immutable")

    # constructors

    @classmethod
    def identity(cls, domain: tuple[float, float] = (0.0, math.inf)) -> PsiMap:
        return cls("identity", domain=domain)

    @classmethod
    def power(cls, rho: float, domain: tuple[float, float] = (0.0, math.inf)) -> PsiMap:
        return cls("power", rho=rho, domain=domain)

    @classmethod
    def log(cls, domain: tuple[float, float] = (1.0, math.inf)) -> PsiMap:
        """psi = ln(xi).  Only valid on domains bounded away from zero."""
        if domain[0] <= 0:
            raise InvalidMapError("psi(xi) = ln(xi) is unbounded at xi = 0; use a domain with a > 0")
        return cls("log", domain=domain)

    @classmethod
    def custom(
        cls,
        f: ArrayFunction,
        df: ArrayFunction,
        inverse: ArrayFunction | None = None,
        domain: tuple[float, float] = (0.0, math.inf),
        name: str = "custom",
    ) -> PsiMap:
        """A user map.  Without ``inverse``, inversion falls back to bracketing root-finding."""
        return cls("custom", domain=domain, f=f, df=df, inverse=inverse, name=name)

    # value semantics

    def _key(self) -> tuple:
        if self.kind == "custom":
            return ("custom", id(self))
        return (self.kind, self.rho, self.domain)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PsiMap):
            return NotImplemented
        if self.kind == "custom" or other.kind == "custom":
            return self is other
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __repr__(self) -> str:
        if self.kind == "power":
            return f"PsiMap.power(rho={self.rho!r})"
        return f"PsiMap.{self.kind}()" if self.kind != "custom" else f"PsiMap.custom({self.name!r})"

    # evaluation (vectorized, no domain checks)

    def __call__(self, xi: Any) -> Any:
        x = np.asarray(xi, dtype=float)
        if self.kind == "identity":
            out = x.copy()
        elif self.kind == "power":
            out = np.power(x, self.rho)
        elif self.kind == "log":
            out = np.log(x)
        else:
            out = np.asarray(self._f(x), dtype=float)  # type: ignore[misc]
        return out if out.ndim else float(out)

    def derivative(self, xi: Any) -> Any:
        x = np.asarray(xi, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "identity":
                out = np.ones_like(x)
            elif self.kind == "power":
                out = self.rho * np.power(x, self.rho - 1.0)
            elif self.kind == "log":
                out = 1.0 / x
            else:
                out = np.asarray(self._df(x), dtype=float) * np.ones_like(x)  # type: ignore[misc]
        return out if out.ndim else float(out)

    def inverse(self, u: Any, bracket: tuple[float, float] | None = None) -> Any:
        """psi^{-1}(u).  ``bracket`` bounds the root search for custom maps."""
        v = np.asarray(u, dtype=float)
        if self.kind == "identity":
            out = v.copy()
        elif self.kind == "power":
            out = np.power(v, 1.0 / self.rho)
        elif self.kind == "log":
            out = np.exp(v)
        elif self._inv is not None:
            out = np.asarray(self._inv(v), dtype=float)
        else:
            if bracket is None:
                raise InvalidMapError("custom map without inverse needs a bracket for root finding")
            lo, hi = bracket
            flo, fhi = float(self(lo)), float(self(hi))

            def solve(target: float) -> float:
                if target <= flo:
                    return lo
                if target >= fhi:
                    return hi
                return brentq(lambda s: float(self(s)) - target, lo, hi, xtol=1e-15, rtol=1e-15)

            out = np.array([solve(float(t)) for t in v.ravel()]).reshape(v.shape)
        return out if out.ndim else float(out)

    def contains(self, xi: float) -> bool:
        a, b = self.domain
        return a <= xi <= b


def _check_in_domain(psi: PsiMap, xi: float) -> None:
    if not (math.isfinite(xi) and psi.contains(xi)):
        raise DomainError(f"xi={xi!r} outside the domain {psi.domain} of {psi!r}")


def eval_psi(psi: PsiMap, xi: float) -> float:
    """psi(xi), with a domain check.  The identity map returns ``xi`` unchanged."""
    _check_in_domain(psi, xi)
    if psi.kind == "identity":
        return float(xi)
    value = float(psi(xi))
    if not math.isfinite(value):
        raise InvalidMapError(f"psi({xi!r}) is not finite for {psi!r}")
    return value


def eval_dpsi(psi: PsiMap, xi: float) -> float:
    """psi'(xi); raises :class:`InvalidMapError` unless it is finite and positive."""
    _check_in_domain(psi, xi)
    value = float(psi.derivative(xi))
    if not math.isfinite(value) or value <= 0.0:
        raise InvalidMapError(f"psi'({xi!r}) = {value!r} for {psi!r}; need a finite positive value")
    return value


@dataclass(frozen=True, eq=False)
class Grid:
    """Nodes ``0 = xi_0 < ... < xi_{n-1} = T`` and their images ``psi(xi_i)``.

    Grids compare by identity; that identity keys the operator-weight cache.
    """

    T: float
    n: int
    nodes: np.ndarray
    psi_nodes: np.ndarray
    rule: str
    psi: PsiMap
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    @property
    def u(self) -> np.ndarray:
        """psi-coordinates shifted so that ``u[0] == 0``."""
        return self.cached("u", lambda: _frozen(self.psi_nodes - self.psi_nodes[0]))

    @property
    def du(self) -> np.ndarray:
        """Cell widths in psi-coordinates (length ``n - 1``)."""
        return self.cached("du", lambda: _frozen(np.diff(self.psi_nodes)))

    @property
    def h(self) -> float:
        """Mean cell width in psi-coordinates."""
        return float(self.psi_nodes[-1] - self.psi_nodes[0]) / (self.n - 1)

    @property
    def trapezoid_weights(self) -> np.ndarray:
        """Nodal weights of the trapezoidal rule in psi-coordinates."""

        def build() -> np.ndarray:
            w = np.zeros(self.n)
            w[:-1] += 0.5 * self.du
            w[1:] += 0.5 * self.du
            return _frozen(w)

        return self.cached("trapezoid", build)

    @property
    def cell_midpoints(self) -> np.ndarray:
        """Cell midpoints in shifted psi-coordinates."""
        return self.cached("mid", lambda: _frozen(0.5 * (self.u[1:] + self.u[:-1])))

    def cached(self, key: Any, build: Callable[[], Any]) -> Any:
        """Return ``self._cache[key]``, building it once under a lock."""
        value = self._cache.get(key)
        if value is None:
            with self._lock:
                value = self._cache.get(key)
                if value is None:
                    value = build()
                    self._cache[key] = value
        return value


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def build_grid(T: float, n: int, psi: PsiMap | None = None, rule: str = "uniform_in_psi") -> Grid:
    """Discretize ``[0, T]`` with ``n`` nodes, equispaced in ``xi`` or in ``psi(xi)``."""
    psi = PsiMap.identity() if psi is None else psi
    if not (math.isfinite(T) and T > 0):
        raise ParameterError(f"T must be positive and finite, got {T!r}")
    if int(n) != n or n < 3:
        raise GridError(f"need at least 3 nodes, got {n!r}")
    n = int(n)
    if rule not in SPACING_RULES:
        raise ParameterError(f"unknown spacing rule {rule!r}")
    rule = SPACING_RULES[rule]
    a, b = psi.domain
    if psi.kind == "log" or not (a <= 0.0 and T <= b):
        raise InvalidMapError(f"{psi!r} is not defined on [0, {T}] (domain {psi.domain})")

    u0, uT = float(psi(0.0)), float(psi(float(T)))
    if not (math.isfinite(u0) and math.isfinite(uT)) or not uT > u0:
        raise InvalidMapError(f"{psi!r} is not increasing on [0, {T}]")
    # Dense monotonicity probe: catches maps that fold back between nodes.
    probe = np.asarray(psi(np.linspace(0.0, T, 8 * n + 1)), dtype=float)
    if not (np.all(np.isfinite(probe)) and np.all(np.diff(probe) > 0)):
        raise InvalidMapError(f"{psi!r} is not strictly increasing on [0, {T}]")

    if rule == "uniform_in_xi":
        nodes = np.linspace(0.0, T, n)
        psi_nodes = np.asarray(psi(nodes), dtype=float)
    else:
        psi_nodes = np.linspace(u0, uT, n)
        nodes = np.asarray(psi.inverse(psi_nodes, bracket=(0.0, float(T))), dtype=float)
        nodes[0], nodes[-1] = 0.0, float(T)
        if psi.kind == "identity":
            nodes = psi_nodes.copy()
    if not (np.all(np.diff(nodes) > 0) and np.all(np.diff(psi_nodes) > 0)):
        raise InvalidMapError(f"{psi!r} produced non-increasing grid nodes")
    # psi' may vanish or blow up at xi = 0 (power maps); the kernels only use
    # differences of psi, so only interior nodes are checked.
    with np.errstate(divide="ignore", invalid="ignore"):
        dpsi = np.asarray(psi.derivative(nodes[1:-1]), dtype=float)
    if not np.all(np.isfinite(dpsi) & (dpsi > 0)):
        raise InvalidMapError(f"psi' must be finite and positive at interior nodes of {psi!r}")
    return Grid(float(T), n, _frozen(nodes), _frozen(psi_nodes), rule, psi)
