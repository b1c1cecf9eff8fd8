"""Command-line entry point: ``gmchaos run|validate|list-experiments``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .experiments import DESCRIPTIONS, ConfigError, ExperimentKind, _validate, parse_config, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmchaos", description="Run chaos-measure simulation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a JSON config")
    run.add_argument("config", help="path to the JSON config")
    run.add_argument("--seed", type=int, help="override master_seed")
    run.add_argument("--out", help="override output_dir")
    run.add_argument("--replicas", type=int, help="override replicas")

    val = sub.add_parser("validate", help="parse and validate a config without running it")
    val.add_argument("config")

    sub.add_parser("list-experiments", help="list the experiment kinds")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    if args.command == "list-experiments":
        for kind in ExperimentKind:
            print(f"{kind.value:22s} {DESCRIPTIONS[kind]}")
        return 0

    try:
        cfg = parse_config(args.config)
        if args.command == "run":
            overrides = {k: v for k, v in (("master_seed", args.seed), ("output_dir", args.out),
                                           ("replicas", args.replicas)) if v is not None}
            cfg = dataclasses.replace(cfg, **overrides)
            _validate(cfg)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"ok: {cfg.kind.value}")
        return 0

    report = run_experiment(cfg)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  value={c.value:.6g}  tolerance={c.tolerance:g}")
    if report.error:
        print(f"ERROR  {report.error}", file=sys.stderr)
    print(f"{'PASS' if report.passed else 'FAIL'}  {cfg.kind.value} -> {cfg.output_dir}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
