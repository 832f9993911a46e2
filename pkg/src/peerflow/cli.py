"""Command-line entry point: ``peerflow {solve,optimize,sweep,validate,check-conditions}``."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from peerflow.config import AXES, RunConfig
from peerflow.equilibrium import solve_equilibrium
from peerflow.errors import ConfigError, PeerflowError
from peerflow.market import Strategy
from peerflow.objectives import evaluate
from peerflow.optimize import OptimumReport, check_conditions, maximize_profit, maximize_welfare, maximize_welfare_constrained
from peerflow.sweep import run_sweep, sweep_values, to_csv
from peerflow.validate import format_report, run_validation

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _global_flags(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument("--config", metavar="PATH", default=default, help="key = value run configuration")
    parser.add_argument("--out", metavar="PATH", default=default, help="write output here instead of stdout")
    parser.add_argument("--seed", type=int, default=default, help="seed for the randomised checks")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peerflow", description="Two-tier peering market solver.")
    _global_flags(parser, None)
    # the same flags after the subcommand; SUPPRESS keeps them from clobbering earlier values
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="equilibrium and objectives at one strategy")
    p.add_argument("--p", type=float, required=True, help="user-side price")
    p.add_argument("--q", type=float, required=True, help="paid-peering price")
    p.add_argument("--r", type=float, required=True, help="capacity share of the paid tier")

    o = sub.add_parser("optimize", parents=[common], help="optimal strategy for an objective")
    o.add_argument("--objective", choices=("profit", "welfare", "welfare-constrained"), default="profit")

    s = sub.add_parser("sweep", parents=[common], help="optimal strategies along one parameter (CSV)")
    s.add_argument("--axis", choices=AXES)
    s.add_argument("--from", dest="start", type=float)
    s.add_argument("--to", dest="stop", type=float)
    s.add_argument("--points", type=int)
    s.add_argument("--workers", type=int, default=1, help="parallel worker processes")

    sub.add_parser("validate", parents=[common], help="oracle cross-checks with a pass/fail table")

    c = sub.add_parser("check-conditions", parents=[common], help="sufficient-condition scans")
    c.add_argument("--grid-size", type=int, default=1000)
    return parser


def _lines(pairs) -> str:
    return "".join(f"{k} = {v}\n" for k, v in pairs)


def _report_lines(rep: OptimumReport, prefix: str = "") -> list[tuple[str, object]]:
    s, eq = rep.strategy, rep.equilibrium
    out = [
        (prefix + "p", repr(s.p)), (prefix + "q", repr(s.q)), (prefix + "r", repr(s.r)),
        (prefix + "regime", rep.regime.value), (prefix + "profit", repr(rep.profit)),
        (prefix + "welfare", repr(rep.welfare)), (prefix + "phi_h", repr(eq.phi_h)),
        (prefix + "phi_l", repr(eq.phi_l)), (prefix + "d_h", repr(eq.d_h)), (prefix + "d_l", repr(eq.d_l)),
        (prefix + "evaluations", rep.n_evals),
    ]
    if rep.foc is not None:
        for f in dataclasses.fields(rep.foc):
            v = getattr(rep.foc, f.name)
            if v is not None and f.name != "welfare_r_is_equality":
                out.append((prefix + "foc." + f.name, f"{v:.3e}"))
    if rep.binding is not None:
        out.append((prefix + "binding", str(rep.binding).lower()))
    for note in rep.notes:
        out.append((prefix + "note", note))
    return out


def cmd_solve(cfg: RunConfig, args) -> tuple[str, int]:
    model, settings = cfg.model(), cfg.settings()
    strategy = Strategy(args.p, args.q, args.r)
    eq = solve_equilibrium(model, strategy, settings)
    val = evaluate(model, strategy, settings, eq)
    return _lines([
        ("phi_h", repr(eq.phi_h)), ("phi_l", repr(eq.phi_l)), ("d_h", repr(eq.d_h)), ("d_l", repr(eq.d_l)),
        ("v_threshold", repr(eq.v_threshold)), ("t", repr(eq.t)), ("profit", repr(val.profit)),
        ("welfare", repr(val.welfare)), ("residual_h", repr(eq.residual_h)), ("residual_l", repr(eq.residual_l)),
    ]), EXIT_OK


def cmd_optimize(cfg: RunConfig, args) -> tuple[str, int]:
    model, settings = cfg.model(), cfg.settings()
    if args.objective == "profit":
        return _lines(_report_lines(maximize_profit(model, settings=settings))), EXIT_OK
    if args.objective == "welfare":
        return _lines(_report_lines(maximize_welfare(model, settings=settings))), EXIT_OK
    prof = maximize_profit(model, settings=settings)
    s = prof.strategy
    _, _, rep = maximize_welfare_constrained(model, s.r, settings=settings, start=(s.p, s.q))
    return _lines(_report_lines(prof, "star.") + _report_lines(rep, "circ.")), EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> tuple[str, int]:
    if args.axis is not None:
        cfg = dataclasses.replace(cfg, sweep_axis=args.axis, sweep_from=None, sweep_to=None)
    lo, hi = cfg.sweep_range()
    lo = lo if args.start is None else args.start
    hi = hi if args.stop is None else args.stop
    points = cfg.sweep_points if args.points is None else args.points
    if points < 2:
        raise ConfigError("a sweep needs at least two points")
    records = run_sweep(cfg, cfg.sweep_axis, sweep_values(lo, hi, points), workers=max(1, args.workers))
    return to_csv(records), EXIT_OK


def cmd_validate(cfg: RunConfig, args) -> tuple[str, int]:
    results = run_validation(cfg)
    return format_report(results), EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def cmd_check_conditions(cfg: RunConfig, args) -> tuple[str, int]:
    if args.grid_size < 100:
        raise ConfigError("--grid-size must be at least 100")
    rep = check_conditions(cfg.model(), grid_size=args.grid_size)
    return _lines([
        ("corollary4_increasing", str(rep.corollary4_increasing).lower()),
        ("corollary6_decreasing", str(rep.corollary6_decreasing).lower()),
        ("corollary5_hazard", str(rep.corollary5_hazard).lower()),
        ("hazard_sup_users", repr(rep.hazard_sup_u)),
        ("hazard_inf_cps", repr(rep.hazard_inf_v)),
        ("scan_points", len(rep.scan_points)),
    ]), EXIT_OK


COMMANDS = {
    "solve": cmd_solve, "optimize": cmd_optimize, "sweep": cmd_sweep,
    "validate": cmd_validate, "check-conditions": cmd_check_conditions,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        out_path = args.out or cfg.output or None
        text, code = COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PeerflowError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        # invalid strategy or parameter values given on the command line
        print(f"ConfigError: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
