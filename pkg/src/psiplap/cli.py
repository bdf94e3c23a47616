"""Command-line entry point: ``psiplap solve | eigen | check | converge | ibp-test``.

Exit codes: 0 success, 1 computed but not converged / hypotheses failed /
study failed, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import nonlinearity as nlcat
from .config import RunConfig
from .eigen import lambda_1, lambda_2_estimate, sign_changes
from .errors import ConfigError, PsiPlapError
from .fractional_operators import integral_matrix
from .hypotheses import HypothesisConfig, audit_theorem
from .solver import default_init, find_critical_point, multistart, ps_diagnostics, select_report
from .studies import classical_solve_study, ibp_study, power_rule_study, self_reference_study

log = logging.getLogger("psiplap")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
SWEEP_KEYS = {"alpha": "problem.alpha", "beta": "problem.beta", "p": "problem.p"}
MANIFOLD_NOTE = "Rayleigh quotient on the unit L^p_psi sphere (reconstructed constraint manifold)"


# ---------------------------------------------------------------------------
# output helpers


def fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_report(path: Path, items: Iterable[tuple[str, Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for key, value in items:
            fh.write(f"{key} = {fmt(value)}\n")


def sibling(path: Path, suffix: str) -> Path:
    """``out.csv`` -> ``out_<suffix>.csv``."""
    return path.with_name(f"{path.stem}_{suffix}{path.suffix or '.csv'}")


def report_path(path: Path) -> Path:
    return path.with_suffix(".report.txt")


def _function_rows(grid, values):
    return zip(grid.nodes, grid.psi_nodes, values)


def _dump_weights(cfg: RunConfig, grid, out: Path) -> None:
    alpha = cfg["problem.alpha"]
    mat = integral_matrix(grid, alpha, "left")
    header = ["row"] + [f"c{j}" for j in range(grid.n)]
    write_csv(sibling(out, "weights"), header, ([i, *mat[i]] for i in range(grid.n)))


# ---------------------------------------------------------------------------
# commands


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    cfg.validate("solve")
    sp, grid, nl, opts = cfg.space(), cfg.grid(), cfg.nonlinearity(), cfg.solve_options()
    if cfg["run.dump_weights"]:
        _dump_weights(cfg, grid, out)
    if cfg["solver.init"] == "eigenfunction":
        first = lambda_1(sp, grid, opts).eigenfunction
        init = default_init(grid, first, cfg["solver.init_scale"])
    else:
        init = default_init(grid, scale=cfg["solver.init_scale"])
    k = cfg["solver.multistart"]
    if k > 1:
        reports = multistart(sp, nl, grid, opts, k, first=init)
        rep = select_report(reports)
        n_conv = sum(r.converged for r in reports)
    else:
        rep = find_critical_point(sp, nl, grid, init, opts)
        n_conv = int(rep.converged)
    diag = ps_diagnostics(rep, sp, nl)
    log.info("solve: converged=%s iterations=%d c=%.12g", rep.converged, rep.iterations, rep.critical_level_c)

    write_csv(out, ["xi", "psi_xi", "phi"], _function_rows(grid, rep.solution.values))
    write_csv(
        sibling(out, "trace"),
        ["iteration", "energy", "grad_norm", "rho", "theta_average", "ps_ratio_p", "ps_ratio_p2"],
        zip(range(len(diag.energy)), diag.energy, diag.grad_norm, diag.rho, diag.theta_average, diag.ps_ratio_p,
            diag.ps_ratio_p2),
    )
    write_report(
        report_path(out),
        [
            ("label", cfg["run.label"]),
            ("command", "solve"),
            ("seed", opts.seed),
            ("n", grid.n),
            ("p", sp.p),
            ("alpha", sp.alpha),
            ("beta", sp.beta),
            ("nonlinearity", nl.catalog_id),
            ("iterations", rep.iterations),
            ("converged", rep.converged),
            ("stop_reason", rep.stop_reason),
            ("critical_level_c", rep.critical_level_c),
            ("final_grad_norm", rep.final_grad_norm),
            ("merit_steps", rep.merit_steps),
            ("multistart", k),
            ("starts_converged", n_conv),
            ("max_abs_phi", float(np.max(np.abs(rep.solution.values)))),
            ("theta_trends_to_zero", diag.theta_trends_to_zero),
            ("theta_stabilizing", diag.theta_stabilizing),
        ],
    )
    return EXIT_OK if rep.converged else EXIT_FAIL


def _parse_sweep(spec: str) -> tuple[str, list[float]]:
    try:
        name, _, rng = spec.partition("=")
        a, b, s = (float(x) for x in rng.split(":"))
    except ValueError as exc:
        raise ConfigError(f"expected name=start:stop:step, got {spec!r}", "--sweep") from exc
    if name not in SWEEP_KEYS:
        raise ConfigError(f"can sweep one of {sorted(SWEEP_KEYS)}, got {name!r}", "--sweep")
    if not s > 0 or b < a:
        raise ConfigError("need step > 0 and stop >= start", "--sweep")
    count = int(math.floor((b - a) / s + 1e-9)) + 1
    return name, [round(a + i * s, 12) for i in range(count)]


def _eigen_run(cfg: RunConfig, level: int, overrides: dict[str, float]):
    sp = cfg.space(alpha=overrides.get("alpha"), beta=overrides.get("beta")) if "p" not in overrides else None
    if "p" in overrides:
        local = RunConfig(dict(cfg.values), cfg.explicit)
        local.set("problem.p", overrides["p"])
        sp = local.space()
    grid, opts = cfg.grid(), cfg.solve_options()
    first = lambda_1(sp, grid, opts)
    if level == 1:
        return sp, first, None
    return sp, lambda_2_estimate(sp, grid, opts, first=first), first


def cmd_eigen(cfg: RunConfig, out: Path, sweep: str | None) -> int:
    cfg.validate("eigen")
    level = cfg["eigen.level"]
    header = ["alpha", "beta", "p", "level", "lambda", "residual", "converged"]
    if sweep:
        name, values = _parse_sweep(sweep)
        points = [{name: v} for v in values]
        for pt in points:  # validate every point before computing
            if name == "p":
                local = RunConfig(dict(cfg.values), cfg.explicit)
                local.set("problem.p", pt["p"])
                local.space()
            else:
                cfg.space(**pt)
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(lambda pt: _eigen_run(cfg, level, pt), points))
        rows = [(sp.alpha, sp.beta, sp.p, level, est.lam, est.residual, est.converged) for sp, est, _ in results]
        write_csv(out, header, rows)
        lams = np.array([r[4] for r in rows])
        all_ok = all(r[6] for r in rows)
        write_report(
            report_path(out),
            [
                ("label", cfg["run.label"]),
                ("command", "eigen"),
                ("sweep", name),
                ("points", len(rows)),
                ("level", level),
                ("all_converged", all_ok),
                ("lambda_monotone_increasing", bool(np.all(np.diff(lams) > 0))),
                ("lambda_monotone_decreasing", bool(np.all(np.diff(lams) < 0))),
                ("constraint_reading", MANIFOLD_NOTE),
            ],
        )
        return EXIT_OK if all_ok else EXIT_FAIL

    sp, est, first = _eigen_run(cfg, level, {})
    grid = est.eigenfunction.grid
    if cfg["run.dump_weights"]:
        _dump_weights(cfg, grid, out)
    write_csv(out, header, [(sp.alpha, sp.beta, sp.p, level, est.lam, est.residual, est.converged)])
    write_csv(sibling(out, "eigenfunction"), ["xi", "psi_xi", "phi"], _function_rows(grid, est.eigenfunction.values))
    items = [
        ("label", cfg["run.label"]),
        ("command", "eigen"),
        ("n", grid.n),
        ("p", sp.p),
        ("alpha", sp.alpha),
        ("beta", sp.beta),
        ("level", level),
        ("lambda", est.lam),
        ("residual", est.residual),
        ("converged", est.converged),
        ("iterations", est.iterations),
        ("upper_bound", est.upper_bound),
        ("eigenfunction_lambda", est.eigenfunction_lambda),
        ("sign_changes", sign_changes(est.eigenfunction)),
        ("constraint_reading", MANIFOLD_NOTE),
    ]
    if first is not None:
        items += [("family", est.family), ("lambda_1", first.lam), ("lambda_1_converged", first.converged)]
    write_report(report_path(out), items)
    return EXIT_OK if est.converged and (first is None or first.converged) else EXIT_FAIL


def cmd_check(cfg: RunConfig, out: Path, theorem: str) -> int:
    cfg.validate("check")
    sp, grid, opts = cfg.space(), cfg.grid(), cfg.solve_options()
    eps = cfg["hypothesis.epsilon"]
    if cfg["hypothesis.lambda_l"] is not None:
        lam_l, lam_next, provenance = cfg["hypothesis.lambda_l"], cfg["hypothesis.lambda_next"], "external"
    else:
        first = lambda_1(sp, grid, opts)
        second = lambda_2_estimate(sp, grid, opts, first=first)
        if not (first.converged and second.converged):
            raise ConfigError("eigenvalue estimates did not converge; supply hypothesis.lambda_l/lambda_next",
                              "hypothesis.lambda_l")
        lam_l, lam_next, provenance = first.lam, second.lam, "computed"
    if not lam_l + eps < lam_next:
        raise ConfigError(f"inconsistent bracket: lambda_l + epsilon = {lam_l + eps!r} >= lambda_next = {lam_next!r}",
                          "hypothesis.epsilon")
    lo, hi = (lam_l + eps, lam_next) if theorem == "1.2" else (lam_l, lam_next - eps)
    mid = 0.5 * (lo + hi)
    nl = cfg.nonlinearity(lam=mid)
    v_setting = cfg["hypothesis.V"]
    if v_setting == "auto":
        if nl.catalog_id != "bracket":
            raise ConfigError("V = auto is only defined for the bracket nonlinearity", "hypothesis.V")
        lam = nl.params["lambda"]
        if not lo < lam < hi:
            raise ConfigError(f"bracket lambda {lam!r} is outside ({lo!r}, {hi!r})", "nonlinearity.lambda")
        v_const = nlcat.bracket_offset_bound(lam, lo, hi, sp.p, nl.params["c"]) * (1.0 + 1e-9) + 1e-12
    else:
        v_const = float(v_setting)
    if v_const < 0:
        raise ConfigError("V must be nonnegative", "hypothesis.V")
    hcfg = HypothesisConfig(
        epsilon=eps,
        growth_constant=cfg["hypothesis.C"],
        V=lambda xi: np.full(np.shape(xi), v_const),
        l=cfg["hypothesis.l"],
        t_max=cfg["hypothesis.t_max"],
        t_lo=cfg["hypothesis.t_lo"],
        t_samples=cfg["hypothesis.t_samples"],
        xi=tuple(grid.nodes),
    )
    audit = audit_theorem(nl, sp, theorem, (lam_l, lam_next), hcfg, provenance=provenance)
    items = [
        ("label", cfg["run.label"]),
        ("command", "check"),
        ("theorem", theorem),
        ("hypotheses_pass", audit.hypotheses_pass),
        ("lambda_l", lam_l),
        ("lambda_next", lam_next),
        ("lambda_provenance", provenance),
        ("epsilon", eps),
        ("V", v_const),
        ("growth_constant", hcfg.growth_constant),
        ("nonlinearity", nl.catalog_id),
        ("nonlinearity_lambda", nl.params.get("lambda", "")),
    ]
    for r in audit.reports:
        key = f"condition_{r.condition_id}"
        items += [
            (f"{key}.holds", r.holds_on_samples),
            (f"{key}.worst_violation", r.worst_violation),
            (f"{key}.side", r.side),
            (f"{key}.witness_xi", r.witness[0]),
            (f"{key}.witness_t", r.witness[1]),
            (f"{key}.asymptotic_estimate", r.asymptotic_estimate),
        ]
        if not r.holds_on_samples:
            print(f"condition {r.condition_id} fails ({r.side}): defect {fmt(r.worst_violation)} "
                  f"with witness xi = {fmt(r.witness[0])}, t = {fmt(r.witness[1])}")
    items += [("recommendation", audit.recommendation), ("expectation", audit.expectation),
              ("note", audit.reports[0].note)]
    write_report(report_path(out), items)
    theta = audit.reports[1]
    write_csv(out, ["xi", f"estimate_{theta.condition_id}"], zip(grid.nodes, theta.node_estimates))
    return EXIT_OK if audit.hypotheses_pass else EXIT_FAIL


DEFAULT_TARGETS = {"power_rule": 1.8, "classical_solve": 1.5, "self_reference": None}


def cmd_converge(cfg: RunConfig, out: Path) -> int:
    cfg.validate("converge")
    case = cfg["converge.case"]
    target = cfg["converge.target_order"] if "converge.target_order" in cfg.explicit else DEFAULT_TARGETS[case]
    levels = cfg["converge.levels"]
    psi, T, rule = cfg.psi(), cfg["grid.T"], cfg["grid.rule"]
    if case == "power_rule":
        study = power_rule_study(cfg.order().alpha, cfg["converge.delta"], levels, psi, T, rule, target)
    elif case == "classical_solve":
        study = classical_solve_study(cfg["problem.p"], levels, psi, T, rule, cfg.solve_options(), target)
    else:
        ref = cfg["converge.reference_n"]
        if "converge.levels" not in cfg.explicit:
            levels = tuple(k for k in levels if k < ref)
        study = self_reference_study(cfg.space(), cfg.nonlinearity(), levels, ref, T, rule, cfg.solve_options(),
                                     target)
    orders = [math.nan, *study.orders]
    write_csv(out, ["n", "error", "observed_order"], zip(study.levels, study.errors, orders))
    write_report(
        report_path(out),
        [
            ("label", cfg["run.label"]),
            ("command", "converge"),
            ("case", case),
            ("levels", " ".join(str(k) for k in study.levels)),
            ("target_order", "none" if target is None else target),
            ("min_order", study.min_order),
            ("final_order", float(study.orders[-1])),
            ("monotone", study.monotone),
            ("passed", study.passed),
        ],
    )
    return EXIT_OK if study.passed else EXIT_FAIL


def cmd_ibp_test(cfg: RunConfig, out: Path) -> int:
    cfg.validate("ibp-test")
    levels = cfg["ibp.levels"]
    if len(levels) < 2:
        print(f"insufficient refinement levels: {levels}", file=sys.stderr)
        return EXIT_FAIL
    order = cfg.order(alpha=cfg["ibp.alpha"], beta=cfg["ibp.beta"])
    study = ibp_study(order, levels, cfg.psi(), cfg["grid.T"], cfg["grid.rule"], cfg["ibp.tol"])
    write_csv(out, ["pair", "identity", "n", "defect"], ((r.pair, r.identity, r.n, r.defect) for r in study.rows))
    items = [
        ("label", cfg["run.label"]),
        ("command", "ibp-test"),
        ("alpha", order.alpha),
        ("beta", order.beta),
        ("levels", " ".join(str(k) for k in levels)),
        ("tol", cfg["ibp.tol"]),
        ("passed", study.passed),
    ]
    for (pair, ident), final in study.final.items():
        items += [(f"{ident}.{pair}.final_defect", final), (f"{ident}.{pair}.monotone", study.monotone[(pair, ident)])]
    items += [
        ("half_hat.expected_boundary_terms", study.expected_boundary),
        ("half_hat.truncated_defect", study.observed_boundary),
        ("half_hat.final_gap", study.boundary_gaps[-1]),
        ("half_hat.gap_decreasing", bool(np.all(np.diff(study.boundary_gaps) < 0))),
    ]
    write_report(report_path(out), items)
    return EXIT_OK if study.passed else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'section.key = value' config file")
    common.add_argument("--out", help="output CSV path (report goes next to it)")
    common.add_argument("--seed", type=int, help="overrides solver.seed")
    common.add_argument("--verbose", action="store_true")
    common.add_argument("--dump-weights", action="store_true", help="also write the left integral weight matrix")

    parser = argparse.ArgumentParser(prog="psiplap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="find a critical point of the energy")
    p.add_argument("--multistart", type=int, help="number of starts (overrides solver.multistart)")
    p = sub.add_parser("eigen", parents=[common], help="first or second variational eigenvalue")
    p.add_argument("--level", type=int, help="1 or 2 (overrides eigen.level)")
    p.add_argument("--sweep", help="name=start:stop:step with name in alpha, beta, p")
    p = sub.add_parser("check", parents=[common], help="audit the hypotheses of an existence theorem")
    p.add_argument("--theorem", choices=("1.2", "1.3"), default="1.2")
    sub.add_parser("converge", parents=[common], help="grid-refinement study")
    sub.add_parser("ibp-test", parents=[common], help="integration-by-parts defect study")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig.from_text("")
        if args.seed is not None:
            cfg.set("solver.seed", args.seed)
        if getattr(args, "multistart", None) is not None:
            cfg.set("solver.multistart", args.multistart)
        if getattr(args, "level", None) is not None:
            cfg.set("eigen.level", args.level)
        if args.dump_weights:
            cfg.set("run.dump_weights", True)
        out = Path(args.out) if args.out else Path(cfg["run.out_dir"]) / f"{cfg['run.label']}_{args.command}.csv"
        if args.command == "solve":
            return cmd_solve(cfg, out)
        if args.command == "eigen":
            return cmd_eigen(cfg, out, args.sweep)
        if args.command == "check":
            return cmd_check(cfg, out, args.theorem)
        if args.command == "converge":
            return cmd_converge(cfg, out)
        return cmd_ibp_test(cfg, out)
    except ConfigError as exc:
        print(f"psiplap: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PsiPlapError as exc:
        print(f"psiplap: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
