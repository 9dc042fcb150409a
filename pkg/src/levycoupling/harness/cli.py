"""``levycoupling`` command line.

    levycoupling run --experiment NAME [--config PATH] [--seed S] [--out DIR]
                     [--workers W] [--override key=value]...
    levycoupling list
    levycoupling trajectory --m M --d D --subcoupler KIND [--seed S] --out FILE

Exit codes: 0 all verdicts pass, 1 a verdict failed or the experiment raised,
2 configuration or usage error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from .config import EXPERIMENTS, ConfigError, load_config
from .experiments import run_experiment
from .report import Report, write_outputs

log = logging.getLogger("levycoupling")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="levycoupling", description="Levy-area coupling experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--experiment", help=f"one of: {', '.join(EXPERIMENTS)}")
    run.add_argument("--config", type=Path, help="flat key = value file")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory")
    run.add_argument("--workers", type=int)
    run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    run.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("list", help="list experiments")
    tr = sub.add_parser("trajectory", help="dump one coupled trajectory as CSV")
    tr.add_argument("--m", type=int, required=True)
    tr.add_argument("--d", type=int, default=2)
    tr.add_argument("--subcoupler", default="edgeworth")
    tr.add_argument("--n-sub", type=int, default=1024)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--out", type=Path, required=True)
    return ap


def _run(args, parser) -> int:
    try:
        cfg = load_config(args.config, args.override, experiment=args.experiment, seed=args.seed, out=args.out, workers=args.workers)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"levycoupling: config error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out)
    log.info("running %s (seed %d) -> %s", cfg.experiment, cfg.seed, out)
    t0 = time.perf_counter()
    error = None
    try:
        report = run_experiment(cfg)
    except Exception as exc:  # reported in summary.json, exit 1
        report = Report(cfg.experiment)
        error = f"{type(exc).__name__}: {exc}"
        log.debug("%s", traceback.format_exc())
    summary = write_outputs(report, out, cfg.seed, cfg.echo(), time.perf_counter() - t0, error)
    for v in report.verdicts:
        print(f"{'PASS' if v.passed else 'FAIL'}  {v.name}  estimate={v.estimate:.6g}  tol={v.tolerance:.3g}")
    if error:
        print(f"ERROR  {error}", file=sys.stderr)
    print(f"{cfg.experiment}: {'PASS' if summary['passed'] else 'FAIL'} ({summary['runtime_seconds']:.1f}s) -> {out}")
    return 0 if summary["passed"] else 1


def _trajectory(args) -> int:
    from ..coupling import GuardConfig, make_subcoupler, run_coupled_walk, write_trajectory_csv
    from ..levyarea import load_cumulants

    try:
        sc = make_subcoupler(args.subcoupler)
    except ValueError as exc:
        print(f"levycoupling: {exc}", file=sys.stderr)
        return 2
    ce = load_cumulants(args.d) if sc.needs_cumulants else None
    traj = run_coupled_walk(args.m, args.d, sc, GuardConfig(), args.n_sub, np.random.default_rng(args.seed), ce)
    write_trajectory_csv(traj, args.out)
    print(f"wrote {args.out} ({traj.partial_sums.shape[0]} steps, {traj.fallbacks} fallbacks)")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING, format="%(message)s")
    if args.command == "list":
        print("\n".join(EXPERIMENTS))
        return 0
    if args.command == "trajectory":
        return _trajectory(args)
    return _run(args, parser)


if __name__ == "__main__":
    sys.exit(main())
