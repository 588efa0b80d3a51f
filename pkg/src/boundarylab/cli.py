"""Command-line experiment runner.

Subcommands:

* ``run <config> [key=value ...]``: execute one experiment, write CSV
  artifacts and ``summary.txt`` into the output directory, and echo the
  summary.  Exit status 0 on pass or inconclusive, 1 on fail, 2 on a
  config/usage error.
* ``validate <config> [key=value ...]``: parse and validate only.
* ``list-experiments``: names of the available experiments.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, ExperimentConfig, parse_config_text
from .experiments import run_experiment

__all__ = ["main"]


def _load(path: str, overrides, seed=None) -> ExperimentConfig:
    text = Path(path).read_text()
    cfg = ExperimentConfig(parse_config_text(text)).override(list(overrides))
    if seed is not None:
        cfg = cfg.override([f"sim.seed={seed}"])
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="boundarylab",
        description="Reflected-diffusion boundary-process laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("config")
    p_run.add_argument("overrides", nargs="*", help="key=value overrides")
    p_run.add_argument("--out", default="results", help="output directory")
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--seed", type=int, default=None, help="override sim.seed")

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config")
    p_val.add_argument("overrides", nargs="*")

    sub.add_parser("list-experiments", help="list available experiments")

    args = parser.parse_args(argv)

    if args.command == "list-experiments":
        for name in EXPERIMENTS:
            print(name)
        return 0

    try:
        if args.command == "validate":
            cfg = _load(args.config, args.overrides)
            cfg.validate()
            print(f"ok: {cfg.experiment} (config hash {cfg.hash()})")
            return 0
        cfg = _load(args.config, args.overrides, seed=args.seed)
        cfg.validate()
    except (ConfigError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    try:
        report = run_experiment(cfg, args.out, threads=args.threads)
    except Exception as e:  # estimator failure: nonzero status with diagnostic
        print(f"experiment failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 1

    print(Path(args.out, "summary.txt").read_text(), end="")
    return 0 if report.status in ("pass", "inconclusive") else 1


if __name__ == "__main__":
    raise SystemExit(main())
