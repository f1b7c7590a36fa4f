"""Command-line entry point: ``lab <experiment> --config <path>``."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .experiments import EXPERIMENTS, ExperimentConfig, default_config, run_experiment

THREADS_ENV = "LAB_THREADS"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lab",
        description="Run an inverse-conductivity laboratory experiment and "
                    "emit CSV results plus a JSON verdict block.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON config; the committed default is used when omitted")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (overrides the config's output_path)")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker pool size; ${THREADS_ENV} is honored when absent")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.config is not None:
        config = ExperimentConfig.from_json(args.config.read_text())
        if config.experiment != args.experiment:
            print(f"config is for {config.experiment!r}, not {args.experiment!r}",
                  file=sys.stderr)
            return 2
    else:
        config = default_config(args.experiment)
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    verdict = run_experiment(config, args.out, threads)
    for item in verdict.assertions:
        status = "PASS" if item["passed"] else "FAIL"
        print(f"[{status}] {item['name']}: {item['detail']}")
    return 0 if verdict.passed else 1


if __name__ == "__main__":
    sys.exit(main())
