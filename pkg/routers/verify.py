"""
Verify Routes - randomized certification of the kernel and DGS inequalities
"""
import argparse

import settings
from controllers.experiment_controller import ExperimentController


def register(subparsers) -> None:
    parser = subparsers.add_parser("verify", help="run the certification suites and write a JSON report")
    parser.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    parser.add_argument("--trials", type=int, default=1000, help="random meshes per suite")
    parser.add_argument("--oracle-trials", type=int, default=100, help="meshes checked against quadrature")
    parser.add_argument(
        "--inject-bad-mesh",
        action="store_true",
        help="add a mesh with a ratio above r*(alpha); it must be flagged and skipped",
    )
    parser.add_argument("--out", default="report.json")
    parser.set_defaults(handler=run_verify)


def run_verify(args: argparse.Namespace) -> int:
    """Exit code 0 when every suite passes; VerificationFailure (exit 2) otherwise"""
    report = ExperimentController.run_verify(
        seed=args.seed,
        trials=args.trials,
        oracle_trials=args.oracle_trials,
        inject_bad_mesh=args.inject_bad_mesh,
    )
    ExperimentController.write_verify_report(report, args.out)
    return 0
