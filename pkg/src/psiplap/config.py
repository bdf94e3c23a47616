"""Flat ``section.key = value`` run configuration.

Lines are ``section.key = value``; ``#`` starts a comment.  Unknown keys,
duplicate keys and malformed values are hard errors raised as
:class:`~psiplap.errors.ConfigError` naming the offending key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .coordinate_map import SPACING_RULES, Grid, PsiMap, build_grid
from .errors import ConfigError, PsiPlapError
from .fractional_operators import FractionalOrder
from .function_spaces import SpaceParams
from . import nonlinearity as nlcat
from .solver import DIRECTIONS, STEP_RULES, SolveOptions


def _levels(text: str) -> tuple[int, ...]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise ValueError("empty list")
    return tuple(int(p) for p in parts)


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


def _real_or(*words: str) -> Callable[[str], Any]:
    def parse(text: str):
        if text in words:
            return text
        return float(text)

    return parse


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


NL_IDS = ("power", "linear", "affine", "zero", "custom", "bracket", "theta_positive", "resonant_sine")

# key -> (parser, default); a default of None means "not set"
SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "psi.kind": (_choice("identity", "power"), "identity"),
    "psi.rho": (float, 2.0),
    "grid.T": (float, 1.0),
    "grid.n": (int, 256),
    "grid.rule": (_choice(*SPACING_RULES), "psi"),
    "problem.p": (float, 2.0),
    "problem.alpha": (float, 1.0),
    "problem.beta": (float, 1.0),
    "nonlinearity.id": (_choice(*NL_IDS), "affine"),
    "nonlinearity.lambda": (_real_or("midpoint"), 1.0),
    "nonlinearity.c": (float, 1.0),
    "nonlinearity.a": (float, 1.0),
    "nonlinearity.f": (str, None),
    "nonlinearity.F": (str, None),
    "solver.max_iter": (int, 200),
    "solver.grad_tol": (float, 1e-8),
    "solver.step_rule": (_choice(*STEP_RULES), "armijo_backtracking"),
    "solver.initial_step": (float, 1.0),
    "solver.armijo_c": (float, 1e-4),
    "solver.armijo_shrink": (float, 0.5),
    "solver.seed": (int, 0),
    "solver.direction": (_choice(*DIRECTIONS), "newton"),
    "solver.regularization_eps": (float, 0.0),
    "solver.multistart": (int, 1),
    "solver.init": (_choice("parabola", "eigenfunction"), "parabola"),
    "solver.init_scale": (float, 1.0),
    "hypothesis.l": (int, 1),
    "hypothesis.epsilon": (float, None),
    "hypothesis.C": (float, 1.0),
    "hypothesis.V": (_real_or("auto"), 0.0),
    "hypothesis.t_max": (float, 1e6),
    "hypothesis.t_lo": (float, 1e2),
    "hypothesis.t_samples": (int, 257),
    "hypothesis.lambda_l": (float, None),
    "hypothesis.lambda_next": (float, None),
    "eigen.level": (int, 1),
    "converge.case": (_choice("power_rule", "classical_solve", "self_reference"), "power_rule"),
    "converge.target_order": (float, None),
    "converge.levels": (_levels, (64, 128, 256, 512)),
    "converge.reference_n": (int, 512),
    "converge.delta": (float, 2.5),
    "ibp.levels": (_levels, (64, 128, 256, 512)),
    "ibp.alpha": (float, 0.5),
    "ibp.beta": (float, 0.5),
    "ibp.tol": (float, 1e-3),
    "run.label": (str, "run"),
    "run.out_dir": (str, "."),
    "run.dump_weights": (_bool, False),
}


def parse_text(text: str, source: str = "<config>") -> dict[str, Any]:
    """Parse config text into a ``{key: value}`` dict with schema types."""
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value', got {raw.strip()!r}")
        key, _, value = (s.strip() for s in line.partition("="))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key", key)
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key", key)
        parser, _ = SCHEMA[key]
        try:
            values[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value {value!r} ({exc})", key) from exc
    return values


@dataclass
class RunConfig:
    """All run settings; ``explicit`` records which keys the user set."""

    values: dict[str, Any] = field(default_factory=dict)
    explicit: frozenset = frozenset()

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> RunConfig:
        given = parse_text(text, source)
        merged = {k: default for k, (_, default) in SCHEMA.items()}
        merged.update(given)
        return cls(merged, frozenset(given))

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {str(p)!r}: {exc.strerror}") from exc
        return cls.from_text(text, str(p))

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def set(self, key: str, value: Any) -> None:
        if key not in SCHEMA:
            raise ConfigError("unknown key", key)
        self.values[key] = value
        self.explicit = self.explicit | {key}

    def require(self, key: str) -> Any:
        value = self.values[key]
        if value is None:
            raise ConfigError("required key is missing", key)
        return value

    # -- builders (each maps module errors to a ConfigError naming the key) --

    def psi(self) -> PsiMap:
        if self["psi.kind"] == "identity":
            return PsiMap.identity()
        return _wrap("psi.rho", lambda: PsiMap.power(self["psi.rho"]))

    def grid(self, n: int | None = None) -> Grid:
        psi = self.psi()
        return _wrap("grid", lambda: build_grid(self["grid.T"], n or self["grid.n"], psi, self["grid.rule"]))

    def order(self, alpha: float | None = None, beta: float | None = None) -> FractionalOrder:
        a = self["problem.alpha"] if alpha is None else alpha
        b = self["problem.beta"] if beta is None else beta
        return _wrap("problem.alpha", lambda: FractionalOrder(a, b))

    def space(self, admissible: bool = True, **order_kw) -> SpaceParams:
        sp = _wrap("problem.p", lambda: SpaceParams(self["problem.p"], self.order(**order_kw), self.psi()))
        if admissible:
            _wrap("problem.alpha", sp.require_admissible_order)
        return sp

    def solve_options(self) -> SolveOptions:
        keys = ("max_iter", "grad_tol", "step_rule", "initial_step", "armijo_c", "armijo_shrink", "seed", "direction",
                "regularization_eps")
        return _wrap("solver", lambda: SolveOptions(**{k: self[f"solver.{k}"] for k in keys}))

    def nonlinearity(self, lam: float | None = None) -> nlcat.Nonlinearity:
        """Catalog nonlinearity; ``lam`` replaces a ``midpoint`` lambda once the bracket is known."""
        kind = self["nonlinearity.id"]
        raw = self["nonlinearity.lambda"]
        if raw == "midpoint":
            if lam is None:
                raise ConfigError("'midpoint' is only meaningful for the check command", "nonlinearity.lambda")
            raw = lam
        p, c, a = self["problem.p"], self["nonlinearity.c"], self["nonlinearity.a"]
        if kind == "power":
            return _wrap("nonlinearity", lambda: nlcat.power(raw, p))
        if kind == "linear":
            return nlcat.linear(raw)
        if kind == "affine":
            return nlcat.affine(c)
        if kind == "zero":
            return nlcat.zero()
        if kind == "bracket":
            return nlcat.bracket(raw, p, c)
        if kind == "theta_positive":
            return nlcat.theta_positive()
        if kind == "resonant_sine":
            return nlcat.resonant_sine(raw, p, a)
        f_expr = self.require("nonlinearity.f")
        return _wrap("nonlinearity.f", lambda: nlcat.from_expression(f_expr, self["nonlinearity.F"]))

    def validate(self, command: str) -> None:
        """Check every key the command will use before any computation starts."""
        T, n = self["grid.T"], self["grid.n"]
        if not (math.isfinite(T) and T > 0):
            raise ConfigError(f"must be a positive number, got {T!r}", "grid.T")
        if n < 5:
            raise ConfigError(f"need at least 5 nodes, got {n!r}", "grid.n")
        self.psi()
        if self["solver.multistart"] < 1:
            raise ConfigError("must be >= 1", "solver.multistart")
        if command in ("solve", "eigen", "check"):
            self.space()
            self.solve_options()
            self.grid()
            if self["nonlinearity.id"] == "custom":
                self.require("nonlinearity.f")
        if command == "eigen" and self["eigen.level"] not in (1, 2):
            raise ConfigError(f"only levels 1 and 2 are supported, got {self['eigen.level']!r}", "eigen.level")
        if command == "check":
            self.require("hypothesis.epsilon")
            if self["hypothesis.l"] != 1 and self["hypothesis.lambda_l"] is None:
                raise ConfigError("levels l > 1 need hypothesis.lambda_l and hypothesis.lambda_next", "hypothesis.l")
            if (self["hypothesis.lambda_l"] is None) != (self["hypothesis.lambda_next"] is None):
                raise ConfigError("give both hypothesis.lambda_l and hypothesis.lambda_next or neither",
                                  "hypothesis.lambda_next")
        elif self["nonlinearity.lambda"] == "midpoint":
            raise ConfigError("'midpoint' is only meaningful for the check command", "nonlinearity.lambda")
        if command == "converge":
            case = self["converge.case"]
            if case == "power_rule":
                self.order()
            else:
                self.space()
                self.solve_options()
            if case == "classical_solve" and not self.order().is_classical:
                raise ConfigError("classical_solve needs problem.alpha = 1", "problem.alpha")
            if any(k < 5 for k in self["converge.levels"]):
                raise ConfigError("every level needs at least 5 nodes", "converge.levels")
        if command == "ibp-test":
            _wrap("ibp.alpha", lambda: FractionalOrder(self["ibp.alpha"], self["ibp.beta"]))
            if not 0 < self["ibp.alpha"] < 1:
                raise ConfigError("must lie in (0, 1)", "ibp.alpha")
            if any(k < 5 for k in self["ibp.levels"]):
                raise ConfigError("every level needs at least 5 nodes", "ibp.levels")


def _wrap(key: str, build: Callable[[], Any]) -> Any:
    try:
        return build()
    except ConfigError:
        raise
    except PsiPlapError as exc:
        raise ConfigError(str(exc), key) from exc
