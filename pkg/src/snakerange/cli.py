"""Command line entry point: ``snakerange <experiment> [--config F] [--seed S] ...``."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config
from .experiments import experiment_names, make_config, run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="snakerange", description="Run a named numerical experiment.")
    ap.add_argument("experiment", help="one of: " + ", ".join(experiment_names()))
    ap.add_argument("--config", help="key = value file (supports include = other.conf)")
    ap.add_argument("--seed", type=int, help="master seed (overrides the config)")
    ap.add_argument("--workers", type=int, help="worker processes for replicas")
    ap.add_argument("--out-dir", help="directory for CSV and manifest output")
    ap.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=None,
                    help="omit wall time from the manifest so reruns are byte-identical (default on)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one parameter")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.experiment not in experiment_names():
        print(f"unknown experiment {args.experiment!r}; valid names: {', '.join(experiment_names())}",
              file=sys.stderr)
        return 2
    try:
        overrides = parse_config(args.config) if args.config else {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            overrides[key.strip()] = value.strip()
        cfg = make_config(args.experiment, overrides, seed=args.seed, workers=args.workers,
                          out_dir=args.out_dir, deterministic=args.deterministic)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    result, manifest = run(cfg)
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.label}: {c.detail}")
    print(f"{cfg.name}: {'PASS' if manifest.passed else 'FAIL'} ({manifest.wall_time:.1f} s), output in {cfg.out_dir}")
    return 0 if manifest.passed else 1


if __name__ == "__main__":
    sys.exit(main())
