"""Sampled audits of the bracket and Theta-growth hypotheses of the existence theorems.

Every audit evaluates signed defects (positive means violated) on a lattice
of xi-nodes times t-samples and reports the worst one with its witness.
A finite lattice can only show that a hypothesis is consistent with the
samples, or produce a counter-witness; "almost everywhere in xi" is read as
"at every xi-node", so measure-zero exceptional sets are invisible.

The limsup/liminf of ``Theta/|t|`` is estimated per node by the max/min of
``Theta/|t|`` over ``t_lo <= |t| <= t_max`` on a geometric lattice.  The
strict sign requirement on that limit is audited with the defect
``estimate + STRICT_MARGIN`` (resp. ``STRICT_MARGIN - estimate``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, NumericError
from .function_spaces import SpaceParams
from .nonlinearity import Nonlinearity

SLACK = 1e-10
STRICT_MARGIN = 1e-8
POINTS_PER_DECADE = 25

CONDITIONS = ("1.8", "1.9", "1.10", "1.11")
THEOREMS = {"1.2": ("1.8", "1.9"), "1.3": ("1.10", "1.11")}


def _zero_v(xi):
    return np.zeros_like(np.asarray(xi, dtype=float))


@dataclass(frozen=True)
class HypothesisConfig:
    """Audit parameters.

    The linear part of the t-lattice has ``2**k + 1`` points for the smallest
    such count ``>= t_samples``, so raising ``t_samples`` only ever adds
    points.  ``extra_t`` lets a caller pin additional samples (e.g. an
    earlier witness).
    """

    epsilon: float
    growth_constant: float = 1.0
    V: Callable = _zero_v
    l: int = 1
    t_max: float = 1e6
    t_lo: float = 1e2
    t_samples: int = 257
    xi: tuple = tuple(np.linspace(0.0, 1.0, 17))
    extra_t: tuple = ()

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon!r}", "hypothesis.epsilon")
        if not self.growth_constant > 0:
            raise ConfigError(f"growth constant must be positive, got {self.growth_constant!r}", "hypothesis.C")
        if not self.t_max > self.t_lo > 0:
            raise ConfigError(f"need t_max > t_lo > 0, got t_lo={self.t_lo!r}, t_max={self.t_max!r}", "hypothesis.t_lo")
        if self.t_samples < 3:
            raise ConfigError(f"t_samples must be >= 3, got {self.t_samples!r}", "hypothesis.t_samples")
        if self.l < 1:
            raise ConfigError(f"level l must be >= 1, got {self.l!r}", "hypothesis.l")
        if len(self.xi) == 0:
            raise ConfigError("no xi nodes to sample", "hypothesis.xi")

    @property
    def xi_nodes(self) -> np.ndarray:
        return np.asarray(self.xi, dtype=float)

    def window(self) -> np.ndarray:
        """Positive geometric |t| lattice over ``[t_lo, t_max]``."""
        decades = math.log10(self.t_max / self.t_lo)
        count = max(2, int(math.ceil(decades * POINTS_PER_DECADE)) + 1)
        return np.geomspace(self.t_lo, self.t_max, count)

    def t_lattice(self) -> np.ndarray:
        k = max(1, math.ceil(math.log2(self.t_samples - 1)))
        lin = np.linspace(-self.t_max, self.t_max, 2**k + 1)
        small = np.geomspace(1e-3, self.t_lo, POINTS_PER_DECADE * 5 + 1)
        w = self.window()
        pos = np.concatenate([small, w])
        extra = np.asarray(self.extra_t, dtype=float)
        return np.unique(np.concatenate([lin, pos, -pos, [0.0], extra]))

    def v_values(self) -> np.ndarray:
        v = np.broadcast_to(np.asarray(self.V(self.xi_nodes), dtype=float), self.xi_nodes.shape)
        if not np.all(np.isfinite(v)):
            raise ConfigError("V is not finite on the xi nodes", "hypothesis.V")
        if np.any(v < 0):
            raise ConfigError("V must be nonnegative", "hypothesis.V")
        return v.copy()


@dataclass(frozen=True)
class HypothesisReport:
    """Outcome of one audited condition.

    ``side`` names the inequality that produced ``worst_violation``:
    ``lower``/``upper`` for the brackets, ``growth`` or ``asymptotic`` for the
    Theta conditions.  ``node_estimates`` holds the per-node limsup/liminf
    estimates (empty for bracket conditions).
    """

    condition_id: str
    holds_on_samples: bool
    worst_violation: float
    witness: tuple[float, float]
    side: str
    asymptotic_estimate: float = math.nan
    node_estimates: np.ndarray = field(default_factory=lambda: np.zeros(0))
    note: str = "sampled audit: consistent with the hypothesis on the lattice, not a proof"


def _finite(a: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NumericError(f"non-finite {what} on the audit lattice")
    return a


def _v_integral(cfg: HypothesisConfig, sp: SpaceParams) -> float:
    xi = cfg.xi_nodes
    if len(xi) < 2:
        return 0.0
    total = float(np.trapezoid(cfg.v_values(), sp.psi(xi))) if hasattr(np, "trapezoid") else float(
        np.trapz(cfg.v_values(), sp.psi(xi))
    )
    if not math.isfinite(total):
        raise ConfigError("integral of psi' V is not finite", "hypothesis.V")
    return total


def _bracket_defects(nl, sp, lo_coef, hi_coef, cfg):
    xi = cfg.xi_nodes[:, None]
    t = cfg.t_lattice()[None, :]
    xi_b, t_b = np.broadcast_arrays(xi, t)
    F = _finite(nl.primitive(xi_b, t_b), "F")
    v = cfg.v_values()[:, None]
    tp = np.abs(t_b) ** sp.p
    lower = lo_coef * tp - v - F
    upper = F - hi_coef * tp - v
    scale = np.maximum(1.0, np.abs(F) + hi_coef * tp + v)
    return xi_b, t_b, lower, upper, scale


def _bracket_report(cid, nl, sp, lo_coef, hi_coef, cfg) -> HypothesisReport:
    _v_integral(cfg, sp)
    xi_b, t_b, lower, upper, scale = _bracket_defects(nl, sp, lo_coef, hi_coef, cfg)
    side = "lower" if lower.max() >= upper.max() else "upper"
    worst = lower if side == "lower" else upper
    idx = np.unravel_index(int(np.argmax(worst)), worst.shape)
    holds = bool(np.all(lower <= SLACK * scale) and np.all(upper <= SLACK * scale))
    return HypothesisReport(
        condition_id=cid,
        holds_on_samples=holds,
        worst_violation=float(worst[idx]),
        witness=(float(xi_b[idx]), float(t_b[idx])),
        side=side,
    )


def check_bracket_lower(nl: Nonlinearity, sp: SpaceParams, lam_l: float, lam_next: float, cfg: HypothesisConfig):
    """``(lam_l + eps)|t|^p - V <= F(xi, t) <= lam_next |t|^p + V``."""
    return _bracket_report("1.8", nl, sp, lam_l + cfg.epsilon, lam_next, cfg)


def check_bracket_upper(nl: Nonlinearity, sp: SpaceParams, lam_l: float, lam_next: float, cfg: HypothesisConfig):
    """``lam_l |t|^p - V <= F(xi, t) <= (lam_next - eps)|t|^p + V``."""
    return _bracket_report("1.10", nl, sp, lam_l, lam_next - cfg.epsilon, cfg)


def _theta_report(cid: str, nl: Nonlinearity, cfg: HypothesisConfig, sign: float) -> HypothesisReport:
    """``sign = +1``: Theta <= C(|t|+1) and limsup Theta/|t| < 0; ``sign = -1`` mirrors it."""
    c = cfg.growth_constant
    xi = cfg.xi_nodes[:, None]
    t = cfg.t_lattice()[None, :]
    xi_b, t_b = np.broadcast_arrays(xi, t)
    th = _finite(nl.theta(xi_b, t_b), "Theta")
    growth = sign * th - c * (np.abs(t_b) + 1.0)
    scale = np.maximum(1.0, np.abs(th) + c * (np.abs(t_b) + 1.0))
    growth_ok = bool(np.all(growth <= SLACK * scale))

    w = cfg.window()
    tw = np.concatenate([-w[::-1], w])[None, :]
    xw, tw = np.broadcast_arrays(xi, tw)
    ratio = _finite(nl.theta(xw, tw), "Theta") / np.abs(tw)
    # limsup for the upper condition, liminf for the lower one
    per_node = ratio.max(axis=1) if sign > 0 else ratio.min(axis=1)
    node = int(np.argmax(sign * per_node))
    estimate = float(per_node[node])
    strict = sign * estimate + STRICT_MARGIN
    g_idx = np.unravel_index(int(np.argmax(growth)), growth.shape)
    if not growth_ok or growth[g_idx] >= strict:
        worst, side = float(growth[g_idx]), "growth"
        witness = (float(xi_b[g_idx]), float(t_b[g_idx]))
    else:
        row = sign * ratio[node]
        j = int(np.argmax(row))
        worst, side = strict, "asymptotic"
        witness = (float(xw[node, j]), float(tw[node, j]))
    holds = growth_ok and strict <= 0.0
    return HypothesisReport(
        condition_id=cid,
        holds_on_samples=bool(holds),
        worst_violation=worst,
        witness=witness,
        side=side,
        asymptotic_estimate=estimate,
        node_estimates=per_node,
    )


def check_theta_negative(nl: Nonlinearity, cfg: HypothesisConfig) -> HypothesisReport:
    """``Theta <= C(|t| + 1)`` on the lattice and ``limsup Theta/|t| < 0`` at every node."""
    return _theta_report("1.9", nl, cfg, 1.0)


def check_theta_positive(nl: Nonlinearity, cfg: HypothesisConfig) -> HypothesisReport:
    """``Theta >= -C(|t| + 1)`` on the lattice and ``liminf Theta/|t| > 0`` at every node."""
    return _theta_report("1.11", nl, cfg, -1.0)


def reevaluate_defect(
    report: HypothesisReport, nl: Nonlinearity, sp: SpaceParams | None, lams: Sequence[float], cfg: HypothesisConfig
) -> float:
    """Recompute the signed defect of ``report`` at its witness from ``f`` and ``F`` alone."""
    xi, t = report.witness
    x = np.array([xi])
    v = float(np.broadcast_to(np.asarray(cfg.V(x), dtype=float), x.shape)[0])
    cid = report.condition_id
    if cid in ("1.8", "1.10"):
        lam_l, lam_next = lams
        lo, hi = (lam_l + cfg.epsilon, lam_next) if cid == "1.8" else (lam_l, lam_next - cfg.epsilon)
        F = float(nl.primitive(xi, t))
        tp = abs(t) ** sp.p
        return lo * tp - v - F if report.side == "lower" else F - hi * tp - v
    sign = 1.0 if cid == "1.9" else -1.0
    th = float(nl.theta(xi, t))
    if report.side == "growth":
        return sign * th - cfg.growth_constant * (abs(t) + 1.0)
    return sign * th / abs(t) + STRICT_MARGIN


@dataclass(frozen=True)
class AuditReport:
    theorem: str
    reports: tuple[HypothesisReport, ...]
    hypotheses_pass: bool
    lambdas: tuple[float, float]
    provenance: str
    recommendation: str
    expectation: str


def audit_theorem(
    nl: Nonlinearity,
    sp: SpaceParams,
    which: str,
    eigen: Sequence,
    cfg: HypothesisConfig,
    provenance: str = "computed",
) -> AuditReport:
    """Run the two checks belonging to ``which`` (``"1.2"`` or ``"1.3"``).

    ``eigen`` holds ``(lam_l, lam_{l+1})`` as floats or converged
    :class:`~psiplap.eigen.EigenEstimate` objects.
    """
    which = str(which)
    if which not in THEOREMS:
        raise ConfigError(f"theorem must be one of {sorted(THEOREMS)}, got {which!r}", "check.theorem")
    if len(eigen) != 2:
        raise ConfigError("need exactly two eigenvalues (lam_l, lam_next)", "hypothesis.lambdas")
    lams = []
    for e in eigen:
        if hasattr(e, "lam"):
            if not e.converged:
                raise ConfigError(f"eigenvalue estimate at level {e.level} did not converge", "eigen")
            lams.append(float(e.lam))
        else:
            lams.append(float(e))
    lam_l, lam_next = lams
    if not lam_l + cfg.epsilon < lam_next:
        raise ConfigError(
            f"inconsistent bracket: lam_l + epsilon = {lam_l + cfg.epsilon!r} >= lam_next = {lam_next!r}",
            "hypothesis.epsilon",
        )
    if which == "1.2":
        reports = (check_bracket_lower(nl, sp, lam_l, lam_next, cfg), check_theta_negative(nl, cfg))
    else:
        reports = (check_bracket_upper(nl, sp, lam_l, lam_next, cfg), check_theta_positive(nl, cfg))
    ok = all(r.holds_on_samples for r in reports)
    return AuditReport(
        theorem=which,
        reports=reports,
        hypotheses_pass=ok,
        lambdas=(lam_l, lam_next),
        provenance=provenance,
        recommendation="run solve: a nonzero critical point is expected" if ok else "no existence claim",
        expectation="existence of a weak solution" if ok else "none",
    )


__all__ = [
    "HypothesisConfig",
    "HypothesisReport",
    "AuditReport",
    "check_bracket_lower",
    "check_bracket_upper",
    "check_theta_negative",
    "check_theta_positive",
    "audit_theorem",
    "reevaluate_defect",
    "CONDITIONS",
    "THEOREMS",
]
