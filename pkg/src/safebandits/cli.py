"""Command-line entry point.

Subcommands: ``run`` executes a configured experiment and writes one CSV
per agent plus pull-count sidecars, ``sweep`` repeats an experiment over a
parameter grid, ``bounds`` prints the theoretical bound constants for the
configured instance as JSON, and ``list-algorithms`` enumerates the
available agents. Exit codes: 0 on success, 1 for configuration problems,
2 for runtime faults.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .agents import ALGORITHMS
from .bounds import bound_report
from .harness import (
    ConfigError,
    ExperimentConfig,
    run_experiment,
    sweep,
    write_results,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safebandits",
        description="Simulation laboratory for safety-constrained bandits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a configured experiment")
    run_p.add_argument("--config", required=True, help="experiment JSON file")
    run_p.add_argument("--out", required=True, help="output directory for CSV/JSON")
    run_p.add_argument("--workers", type=int, default=None, help="parallel trial workers")

    sweep_p = sub.add_parser("sweep", help="run an experiment over a parameter grid")
    sweep_p.add_argument("--config", required=True, help="experiment JSON template")
    sweep_p.add_argument("--param", required=True, help="dotted config path to vary")
    sweep_p.add_argument(
        "--values", required=True, help="JSON array of grid values, e.g. '[0.5,0.52]'"
    )
    sweep_p.add_argument("--out", required=True, help="output directory")
    sweep_p.add_argument("--workers", type=int, default=None)

    bounds_p = sub.add_parser("bounds", help="print theoretical bound constants as JSON")
    bounds_p.add_argument("--config", required=True, help="experiment JSON file")
    bounds_p.add_argument(
        "--bayes-safety",
        action="store_true",
        help="apply the 2/3 safety-divergence deflation of the posterior-quantile analysis",
    )

    sub.add_parser("list-algorithms", help="list available agent algorithms")
    return parser


def _load_config(path: str) -> ExperimentConfig:
    return ExperimentConfig.from_json_file(path)


def _cmd_run(args) -> int:
    config = _load_config(args.config)
    results = run_experiment(config, workers=args.workers)
    written = write_results(results, args.out, config)
    for path in written:
        print(path)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as handle:
            config_data = json.load(handle)
    except (OSError, json.JSONDecodeError) as bad:
        raise ConfigError(f"cannot read config {args.config}: {bad}") from None
    try:
        values = json.loads(args.values)
    except json.JSONDecodeError as bad:
        raise ConfigError(f"--values is not valid JSON: {bad}") from None
    if not isinstance(values, list):
        raise ConfigError("--values must be a JSON array")
    ExperimentConfig.from_dict(json.loads(json.dumps(config_data)))  # fail fast
    result = sweep(config_data, args.param, values, workers=args.workers)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "sweep.csv"
    result.to_csv(csv_path)
    print(csv_path)
    if result.failures:
        for tag, error in result.failures:
            print(f"failed grid point {tag}: {error}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_bounds(args) -> int:
    config = _load_config(args.config)
    report = bound_report(config.instance, bayes_safety=args.bayes_safety)
    print(json.dumps(report.to_dict(horizon=config.horizon), indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "bounds":
            return _cmd_bounds(args)
        if args.command == "list-algorithms":
            for name in ALGORITHMS:
                print(name)
            return EXIT_OK
        parser.error(f"unknown command {args.command}")
    except ConfigError as bad:
        print(f"config error: {bad}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as bad:  # runtime fault
        print(f"runtime error: {bad}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
