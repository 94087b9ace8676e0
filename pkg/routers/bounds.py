"""
Bounds Routes - ratio-bound table over an alpha grid
"""
import argparse
import logging

from controllers.experiment_controller import ExperimentController

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("bounds", help="tabulate r*(alpha), gamma_max(alpha) and 3 - alpha")
    parser.add_argument("--alphas", default="0.01:0.99:99", help="start:stop:count or a comma list")
    parser.add_argument("--out", default="bounds.csv", help="output CSV")
    parser.set_defaults(handler=run_bounds)


def run_bounds(args: argparse.Namespace) -> int:
    """
    Write the bounds CSV

    Args:
        args: Parsed arguments with alphas and out

    Returns:
        Exit code 0
    """
    alphas = ExperimentController.parse_alpha_grid(args.alphas)
    rows = ExperimentController.bounds_table(alphas)
    ExperimentController.write_rows_csv(rows, args.out)
    worst = min(rows, key=lambda row: row.r_star)
    logger.info("smallest r* = %.6f at alpha = %.4f", worst.r_star, worst.alpha)
    return 0
