"""Command line entry point: ``spillover-lab <command> [options]``.

Exit codes: 0 success, 1 usage or input error, 2 an identifying assumption
fails (overlap, empty sender/receiver sets), 3 an oracle check failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import estimators as est
from .checks import run_checks
from .design import DesignError, verify_overlap
from .estimands import EstimandError, estimand_report
from .montecarlo import OverlapError, run_monte_carlo
from .network import NetworkError
from .oracle import CapExceeded
from .outcomes import OutcomeError
from .rng import CounterStream
from .scenario import AssumptionViolation, Scenario, ScenarioError
from .tables import DEFAULT_SEED, TABLE_IDS, reproduce_table

EXIT_OK, EXIT_USAGE, EXIT_ASSUMPTION, EXIT_CHECK = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _emit(args, name: str, payload: dict | None = None, csv_text: str | None = None) -> None:
    if args.format == "csv" and csv_text is None:
        raise UsageError(f"{args.command} has no CSV form; use --format json")
    text = csv_text if args.format == "csv" else json.dumps(_jsonable(payload), indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.{args.format}").write_text(text)
    else:
        sys.stdout.write(text)


def _load(args) -> Scenario:
    if not args.scenario:
        raise UsageError("--scenario is required")
    sc = Scenario.load(args.scenario)
    if args.seed is not None:
        sc.master_seed = args.seed
    if getattr(args, "reps", None):
        sc.reps = args.reps
    return sc


def _realized_z(sc: Scenario, ctx) -> np.ndarray:
    if sc.z is None:
        return ctx.beta.draw(ctx.net, CounterStream(sc.master_seed, 0))
    z = np.asarray(sc.z, dtype=np.int8)
    if z.shape != (ctx.net.total_units,) or not np.isin(z, (0, 1)).all():
        raise UsageError("z must list one 0/1 entry per unit, clusters in order")
    return z


def _check_overlap(ctx) -> None:
    ov = verify_overlap(ctx.alpha, ctx.beta, ctx.net, cap=ctx.scenario.cap)
    if not (ov.ok and ov.leave_one_out_ok):
        raise OverlapError(f"overlap fails: {ov.violations or ov.leave_one_out_violations}")


def cmd_estimand(args) -> int:
    sc = _load(args)
    ctx = sc.build()
    rep = estimand_report(ctx.net, ctx.model, ctx.alpha, sc.labels, sc.cap)
    _emit(args, "estimand", rep.to_json())
    return EXIT_OK


def cmd_estimate(args) -> int:
    sc = _load(args)
    ctx = sc.build()
    _check_overlap(ctx)
    z = _realized_z(sc, ctx)
    rep = est.estimate(ctx.net, ctx.model, ctx.alpha, ctx.beta, z, level=sc.level, form=args.form)
    _emit(args, "estimate", {**rep.to_json(), "z": z.tolist()})
    return EXIT_OK


def cmd_simulate(args) -> int:
    sc = _load(args)
    ctx = sc.build()
    rep = run_monte_carlo(ctx, workers=args.workers)
    lines = ["estimator,truth,mean,bias,variance,mean_vc,coverage,skipped,used"]
    for k, s in rep.estimators.items():
        vals = [s.truth, s.mean, s.bias, s.variance, s.mean_vc, s.coverage]
        lines.append(",".join([k] + ["" if v is None else f"{v:.6g}" for v in vals] + [str(s.skipped), str(s.used)]))
    _emit(args, "simulate", rep.to_json(), "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    sc = _load(args)
    ctx = sc.build()
    _check_overlap(ctx)
    z = _realized_z(sc, ctx) if sc.z is not None else None
    results = run_checks(ctx, z, sc.labels)
    payload = {"all_passed": all(r.passed for r in results), "checks": {r.name: r.to_json() for r in results}}
    _emit(args, "oracle_check", payload)
    return EXIT_OK if payload["all_passed"] else EXIT_CHECK


def cmd_reproduce(args) -> int:
    seed = DEFAULT_SEED if args.seed is None else args.seed
    for tid in args.tables:
        t = reproduce_table(tid, seed=seed, reps=args.reps, workers=args.workers)
        _emit(args, tid.upper(), t.to_json(), t.to_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file")
    common.add_argument("--seed", type=int, help="master seed for assignment draws")
    common.add_argument("--out", help="directory to write results into (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--reps", type=int)

    p = _Parser(prog="spillover-lab", description="Outward and inward spillover effects on clustered networks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("estimand", parents=[common], help="exact estimands and equivalence diagnostics").set_defaults(fn=cmd_estimand)
    e = sub.add_parser("estimate", parents=[common], help="estimates from one realized assignment")
    e.add_argument("--form", choices=("receiver", "sender"), default="receiver")
    e.set_defaults(fn=cmd_estimate)
    sub.add_parser("simulate", parents=[common], help="Monte Carlo over the realized design").set_defaults(fn=cmd_simulate)
    sub.add_parser("oracle-check", parents=[common], help="exact checks by enumeration").set_defaults(fn=cmd_oracle_check)
    r = sub.add_parser("reproduce-table", parents=[common], help="emit one or more of the comparison tables")
    r.add_argument("tables", nargs="+", choices=TABLE_IDS + tuple(t.lower() for t in TABLE_IDS), metavar="TABLE")
    r.set_defaults(fn=cmd_reproduce)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("spillover-lab: error: --workers must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.fn(args)
    except (OverlapError, AssumptionViolation, EstimandError, est.EstimatorError) as exc:
        print(f"spillover-lab: assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (UsageError, ScenarioError, NetworkError, OutcomeError, DesignError, CapExceeded, OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        print(f"spillover-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
