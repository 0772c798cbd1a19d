#!/usr/bin/env python3
"""
GHZ fidelity toolkit - command line entry point.

Subcommands:
    verify   run the exact oracle suite (exit 1 on any failure)
    trial    run one experiment and print the error decomposition per protocol
    sweep    sweep one parameter, write CSV (+ optional SVG and JSON manifest)

Usage:
    python main.py verify
    python main.py trial --config config/experiments/iid_white.conf --seed 7
    python main.py sweep --config config/experiments/dark_count.conf \\
        --param p_dark --values 0.1,0.3,0.5,0.7,0.9 --trials 10000 \\
        --out results/p_dark.csv --svg results/p_dark.svg --seed 1
"""

import argparse
import sys
import time
from pathlib import Path
from typing import Optional

from core import constants
from core.exceptions import GhzFidelityError
from models.experiment_config import ExperimentConfig
from utils.error_handler import log_exception
from utils.helpers import format_time, parse_value_list


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig.defaults()
    return config.with_overrides(
        seed=args.seed,
        trials=getattr(args, "trials", None),
        protocol=getattr(args, "protocol", None),
        workers=getattr(args, "workers", None),
    ).validate()


# ---------------------- Commands ----------------------


def cmd_verify(args: argparse.Namespace) -> int:
    from core.verify import run_all

    started = time.perf_counter()
    reports = run_all(seed=args.seed or 0, quick=args.quick)
    for report in reports:
        print(report.line())
    failed = sum(not r.passed for r in reports)
    print(f"{len(reports) - failed}/{len(reports)} checks passed in "
          f"{format_time(time.perf_counter() - started)}")
    return 0 if failed == 0 else 1


def cmd_trial(args: argparse.Namespace) -> int:
    from core.experiment import build_setup, run_trial, run_trials

    config = _load_config(args)
    if args.index is not None:
        setup = build_setup(config)
        for name in setup.names:
            result = run_trial(setup, args.index, name)
            print(f"{name:<9} f_hat={result.f_hat:.6f} fbar_sampled={result.fbar_sampled:.6f} "
                  f"fbar_unsampled={result.fbar_unsampled:.6f} sq_err={result.squared_error:.3e}")
        return 0

    accumulators = run_trials(config, progress=not args.quiet)
    print(f"L={config.L} N={config.N} M={config.M} target={config.target} "
          f"noise={config.noise_model}/{config.noise.kind} trials={config.trials} seed={config.seed}")
    for name, acc in accumulators.items():
        row = acc.to_row(config)
        print(f"{name:<9} mse={row.mse:.4e}±{row.mse_stderr:.1e} bias={row.bias:+.2e}±{row.bias_stderr:.1e} "
              f"measurement={row.measurement_mse:.4e} sampling={row.sampling_mse:.4e} "
              f"cross={acc.mean('cross'):+.1e} analytic_var={row.analytic_variance:.4e} "
              f"lower_bound={row.lower_bound:.4e}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    from core.experiment import emit_csv, emit_svg, run_sweep, write_manifest
    from utils.error_handler import safe_operation

    config = _load_config(args)
    values = parse_value_list(args.values)
    started = time.perf_counter()
    rows = run_sweep(config, args.param, values, progress=not args.quiet)
    elapsed = time.perf_counter() - started

    emit_csv(rows, args.out)
    if args.svg:
        emit_svg(rows, args.svg)
    with safe_operation("Writing run manifest", silent=True):
        write_manifest(args.out, config, args.param, values, elapsed)

    for row in rows:
        print(f"{row.parameter}={row.value:<8g} {row.protocol:<9} mse={row.mse:.4e}±{row.mse_stderr:.1e} "
              f"lower_bound={row.lower_bound:.4e}")
    print(f"✅ {len(rows)} rows -> {args.out} ({format_time(elapsed)})")
    return 0


# ---------------------- Parser ----------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Fidelity estimation of GHZ-state ensembles with local measurements",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Exact oracle suite
  python main.py verify

  # Error decomposition for one experiment
  python main.py trial --config config/experiments/iid_white.conf --seed 7

  # Dark-count sweep over the correlation 1 - delta
  python main.py sweep --config config/experiments/dark_count.conf \\
      --param delta --values 1.5,1.25,1.0,0.75,0.5 --out results/delta.csv --svg results/delta.svg
        """
    )
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="Run the exact oracle suite")
    verify.add_argument("--seed", type=int, default=None, help="Seed of the random test states")
    verify.add_argument("--quick", action="store_true", help="Reduced sample counts")
    verify.set_defaults(handler=cmd_verify)

    for name, handler, text in (("trial", cmd_trial, "Run one experiment"),
                                ("sweep", cmd_sweep, "Sweep one parameter")):
        command = sub.add_parser(name, help=text)
        command.add_argument("--config", type=str, default=None,
                             help="key = value experiment file (default: application settings)")
        command.add_argument("--seed", type=int, default=None, help="Master seed (overrides the file)")
        command.add_argument("--trials", type=int, default=None, help="Number of trials")
        command.add_argument("--protocol", type=str, default=None,
                             help=f"Comma separated subset of {','.join(constants.PROTOCOL_NAMES)} or 'all'")
        command.add_argument("--workers", type=str, default=None, help="Process count or 'auto'")
        command.add_argument("--quiet", action="store_true", help="No progress bar")
        command.set_defaults(handler=handler)
        if name == "trial":
            command.add_argument("--index", type=int, default=None,
                                 help="Print the single trial with this index instead of statistics")
        else:
            command.add_argument("--param", required=True, choices=constants.SWEEP_PARAMETERS)
            command.add_argument("--values", required=True, help="Comma separated grid, e.g. 0.1,0.5,0.9")
            command.add_argument("--out", required=True, type=Path, help="CSV output path")
            command.add_argument("--svg", type=Path, default=None, help="Optional SVG chart path")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (GhzFidelityError, OSError) as e:
        log_exception(e, context=args.command)
        print(f"❌ {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
