"""
Converge Routes - temporal convergence orders against a manufactured solution
"""
import argparse

from controllers.experiment_controller import ExperimentController


def register(subparsers) -> None:
    parser = subparsers.add_parser("converge", help="error sweep over refined graded meshes")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", help="INI run configuration")
    source.add_argument("--preset", help="named preset, e.g. ex1")
    parser.add_argument("--alpha", type=float, help="override the fractional order")
    parser.add_argument("--gamma", type=float, help="override the grading exponent")
    parser.add_argument("--out", default="conv.csv")
    parser.set_defaults(handler=run_converge)


def run_converge(args: argparse.Namespace) -> int:
    """
    Write alpha, gamma, N, tau_max, error, order, expected_order per refinement

    Returns:
        Exit code 0; solver failures propagate as SolverFailure (exit 3)
    """
    config = ExperimentController.resolve_config(args.config, args.preset, args.alpha)
    rows = ExperimentController.run_converge(config, gamma_exp=args.gamma)
    ExperimentController.write_rows_csv(rows, args.out)
    return 0
