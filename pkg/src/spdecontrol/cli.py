"""Command-line entry point: run, validate, and list bundled experiments."""

from __future__ import annotations

import argparse
import sys

from .config import list_experiments, load_config
from .exceptions import ConfigurationError, DegenerateBatchError, SpdeControlError
from .experiments import run_experiment

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID_CONFIG = 2
EXIT_DEGENERATE = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spdecontrol",
        description="Sampling-based variational control benchmarks for stochastic fields.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config (path or bundled name)")
    run_p.add_argument("config")
    run_p.add_argument("--seed", type=int, help="override the master seed")
    run_p.add_argument("--trials", type=int, help="override the trial count")
    run_p.add_argument("--mode", choices=("open-loop", "mpc"), help="override the driver mode")
    run_p.add_argument("--out", help="override the output directory")
    run_p.add_argument("--workers", type=int,
                       help="trial worker processes (default: SPDECONTROL_WORKERS or CPU count)")

    val_p = sub.add_parser("validate", help="parse and validate a config, then exit")
    val_p.add_argument("config")

    sub.add_parser("list-experiments", help="list bundled experiment names")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "list-experiments":
            for name in list_experiments():
                print(name)
            return EXIT_OK
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"{cfg.name}: valid ({cfg.kind}, mode={cfg.mode}, trials={cfg.trials})")
            return EXIT_OK
        cfg = cfg.with_overrides(seed=args.seed, trials=args.trials,
                                 mode=args.mode, out_dir=args.out)
        if not cfg.girsanov_consistent:
            print(
                f"warning: sigma={cfg.sigma} and rho={cfg.rho} violate sigma = 1/sqrt(rho); "
                "the sampling correction is approximate for this pair",
                file=sys.stderr,
            )
        result = run_experiment(cfg, workers=args.workers)
        for r in result.regions:
            print(f"{cfg.name} [{cfg.mode}] {r.label}: rmse={r.rmse:.6g} "
                  f"avg_sigma={r.avg_sigma:.6g}")
        print(f"outputs: {result.out_path} ({result.runtime_s:.1f} s)")
        return EXIT_OK
    except DegenerateBatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG
    except SpdeControlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
