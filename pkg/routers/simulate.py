"""
Simulate Routes - coarsening runs with energy ledger and snapshots
"""
import argparse

from controllers.experiment_controller import ExperimentController
from models.solver_models import Scheme


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="run the time-fractional Cahn-Hilliard model")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", help="INI run configuration")
    source.add_argument("--preset", help="named preset, e.g. ex2-desk or eta-study-100")
    parser.add_argument("--alpha", type=float, help="override the fractional order")
    parser.add_argument(
        "--scheme", choices=[s.value for s in Scheme], default=Scheme.FBDF2.value,
        help="bdf2 runs the classical reference scheme",
    )
    parser.add_argument("--seed", type=int, help="override the [solver] seed of random initial data")
    parser.add_argument("--outdir", default="run")
    parser.set_defaults(handler=run_simulate)


def run_simulate(args: argparse.Namespace) -> int:
    config = ExperimentController.resolve_config(args.config, args.preset, args.alpha, args.seed)
    ExperimentController.run_simulation(config, args.outdir, Scheme(args.scheme))
    return 0
