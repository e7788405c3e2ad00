#!/usr/bin/env python
"""
Main entry point for the SNN calibration toolkit.

Trains a threshold-ReLU DNN, converts it to an integrate-and-fire SNN with
percentile-calibrated threshold/output scaling, fine-tunes it with surrogate
gradients and reports accuracy, conversion error and inference energy.

Usage:
    python main.py <command> [--config FILE] [options]

Commands:
    train-dnn           Train the source DNN
    calibrate-convert   Collect activation statistics and convert to an SNN
    finetune            Surrogate-gradient fine-tuning of the converted SNN
    evaluate            Accuracy, spikes, FLOPs and energy at the calibrated T
    analyze             Conversion-error estimates over the configured T sweep
    energy-report       Per-layer cost report and spike histograms
    pipeline            All of the above in order

Example:
    python main.py pipeline --config data/toy_blobs.json
    python main.py evaluate --config data/toy_blobs.json --time-steps 2

Exit codes:
    0 success, 2 invalid config, 3 training diverged, 4 bad artifact,
    5 time-step mismatch, 6 too few samples for an estimate

Note: SNNCAL_OUTPUT_ROOT and SNNCAL_LOG_LEVEL may be set in a .env file.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from convert.conversion import ConversionMode
from netcore.errors import SnnCalError
from pipeline.config import LOG_LEVEL_ENV, apply_overrides, load_config
from pipeline.runner import ExperimentRunner
from utils.formatter import format_error_report, format_metrics

COMMANDS = {
    "train-dnn": "train_dnn",
    "calibrate-convert": "calibrate_convert",
    "finetune": "finetune",
    "evaluate": "evaluate",
    "analyze": "analyze",
    "energy-report": "energy_report",
    "pipeline": "run_pipeline",
}


def build_parser() -> argparse.ArgumentParser:
    """Command-line parser; every subcommand shares the override flags."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="Experiment config (JSON)")
    common.add_argument("--time-steps", type=int, default=None, help="Simulation length T")
    common.add_argument("--mode", choices=[m.value for m in ConversionMode], default=None,
                        help="Conversion mode")
    common.add_argument("--seed", type=int, default=None, help="Master seed")
    common.add_argument("--output-dir", type=Path, default=None, help="Run directory")
    common.add_argument("--epochs", type=int, default=None, help="DNN training epochs")
    common.add_argument("--snn-epochs", type=int, default=None, help="SNN fine-tuning epochs")
    common.add_argument("--log-level", default=None, help="Logging level (default: $SNNCAL_LOG_LEVEL or INFO)")

    parser = argparse.ArgumentParser(prog="main.py", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _setup_logging(level: Optional[str]) -> None:
    level = (level or os.getenv(LOG_LEVEL_ENV, "INFO")).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse ``argv``, run the requested stage and return the exit code.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])

    Returns:
        Process exit code
    """
    load_dotenv()
    args = build_parser().parse_args(argv)
    _setup_logging(args.log_level)
    try:
        config = apply_overrides(load_config(args.config), time_steps=args.time_steps, mode=args.mode,
                                 seed=args.seed, output_dir=args.output_dir, epochs=args.epochs,
                                 snn_epochs=args.snn_epochs)
        runner = ExperimentRunner(config)
        print(f"\n🚀 {args.command} → {runner.run_dir}\n")
        stage = getattr(runner, COMMANDS[args.command])
        if args.command == "evaluate":
            result = stage(args.time_steps)
        else:
            result = stage()
    except SnnCalError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return e.exit_code

    if args.command in ("evaluate", "pipeline"):
        print("\n" + format_metrics(result))
    elif args.command == "analyze":
        print("\n" + format_error_report(result))
    return 0


def main():
    """Main entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
