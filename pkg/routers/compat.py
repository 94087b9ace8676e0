"""
Compat Routes - FBDF2 against BDF2 as alpha approaches 1
"""
import argparse

from controllers.experiment_controller import ExperimentController


def register(subparsers) -> None:
    parser = subparsers.add_parser("compat", help="distance of FBDF2(alpha) from BDF2 on a uniform mesh")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", help="INI run configuration")
    source.add_argument("--preset", default="compat", help="named preset (default: compat)")
    parser.add_argument("--alphas", default="0.9,0.99,0.999")
    parser.add_argument("--N", type=int, default=100, help="number of uniform steps")
    parser.add_argument("--out", default="compat.csv")
    parser.set_defaults(handler=run_compat)


def run_compat(args: argparse.Namespace) -> int:
    config = ExperimentController.resolve_config(args.config, None if args.config else args.preset)
    alphas = ExperimentController.parse_alpha_grid(args.alphas)
    rows = ExperimentController.run_compat(config, alphas, args.N)
    ExperimentController.write_rows_csv(rows, args.out)
    return 0
