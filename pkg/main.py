"""
tfch - variable-step FBDF2 toolkit for the time-fractional Cahn-Hilliard equation

Usage:
    python main.py bounds --alphas 0.01:0.99:99 --out bounds.csv
    python main.py verify --seed 42 --out report.json
    python main.py converge --config configs/ex1.cfg --out conv.csv
    python main.py simulate --config configs/ex2.cfg --outdir runs/a05
"""
import argparse
import logging
import sys
from typing import List, Optional

import settings
from controllers.experiment_controller import ExperimentController
from errors import TfchError
from models.report_models import Command, RunSpec
from routers import ROUTERS

logger = logging.getLogger("tfch")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tfch",
        description="Variable-step FBDF2 experiments for the time-fractional Cahn-Hilliard model",
    )
    parser.add_argument("--log-level", help="overrides TFCH_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for router in ROUTERS:
        router.register(subparsers)
    return parser


def run_spec(args: argparse.Namespace) -> RunSpec:
    """
    Resolved invocation recorded at the start of every run

    Commands driven by a run configuration record the configured seed unless
    --seed overrides it.
    """
    seed = getattr(args, "seed", None)
    if seed is None and hasattr(args, "config"):
        preset = None if args.config else getattr(args, "preset", None)
        seed = ExperimentController.resolve_config(args.config, preset).solver.seed
    return RunSpec(
        command=Command(args.command),
        config_path=getattr(args, "config", None),
        preset=getattr(args, "preset", None),
        output=getattr(args, "out", None) or getattr(args, "outdir", None),
        seed=seed,
    )


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one tfch command

    Returns:
        0 on success, 1 for usage or configuration errors, 2 when a
        certification suite fails, 3 when the solver fails
    """
    args = build_parser().parse_args(argv)
    settings.configure_logging(args.log_level)
    try:
        logger.info("tfch %s", run_spec(args).model_dump(exclude_none=True))
        return args.handler(args)
    except TfchError as e:
        logger.error("%s: %s", type(e).__name__, e.detail)
        if e.diagnostics:
            logger.error("diagnostics: %s", e.diagnostics)
        return e.exit_code
    except Exception as e:
        logger.exception("unexpected error: %s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
