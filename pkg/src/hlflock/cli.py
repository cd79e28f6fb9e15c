"""Command-line entry points: simulate, sweep, verify, summary."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .acceptance import SUITES, run_suite
from .config import load_config
from .errors import FlockError
from .runner import execute_run, run_sweep, write_sweep_summary_csv


def _apply_overrides(config, args):
    if getattr(args, "output", None):
        config.output_dir = args.output
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config


def cmd_simulate(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    artifacts = execute_run(config)
    print(f"wrote {artifacts.trajectory_csv}")
    print(f"wrote {artifacts.diagnostics_csv}")
    print(f"wrote {artifacts.summary_json}")
    verdict = artifacts.summary["verdict"]
    print(f"flocking={verdict['flocking']} v_ratio={verdict['v_ratio']:.3e}")
    return 0


def cmd_sweep(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    index = run_sweep(config, workers=args.workers)
    print(f"wrote {index}")
    return 0


def cmd_verify(args) -> int:
    results = run_suite(args.suite)
    for result in results:
        print(result.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_summary(args) -> int:
    if args.output:
        warnings = write_sweep_summary_csv(args.index, args.output)
        print(f"wrote {args.output}")
    else:
        from .runner import summarize_sweep

        header, rows, warnings = summarize_sweep(args.index)
        print(",".join(header))
        for row in rows:
            print(",".join(row))
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hlflock",
        description="Delayed leadership-flock simulator and verification harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one configuration")
    p_sim.add_argument("config", type=Path)
    p_sim.add_argument("--output", help="override the output directory")
    p_sim.add_argument("--seed", type=int, help="override the config seed")
    p_sim.set_defaults(fn=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="expand and run the config's sweep axes")
    p_sweep.add_argument("config", type=Path)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--output", help="override the output directory")
    p_sweep.add_argument("--seed", type=int, help="override the config seed")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run a verification suite")
    p_verify.add_argument("suite", choices=sorted(SUITES) + ["all"])
    p_verify.set_defaults(fn=cmd_verify)

    p_summary = sub.add_parser("summary", help="tabulate a finished sweep")
    p_summary.add_argument("index", type=Path)
    p_summary.add_argument("--output", help="write the table to a CSV file")
    p_summary.set_defaults(fn=cmd_summary)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (FlockError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
