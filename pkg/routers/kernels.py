"""
Kernels Routes - debug dump of the FBDF2 kernel rows
"""
import argparse

from controllers.experiment_controller import ExperimentController


def register(subparsers) -> None:
    parser = subparsers.add_parser("kernels", help="write a, eta, B, a_hat and A for every level")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", help="INI run configuration (graded mesh from [mesh])")
    source.add_argument("--preset", help="named preset")
    parser.add_argument("--mesh-csv", help="mesh exported by simulate (k, t_k, tau_k, r_k)")
    parser.add_argument("--alpha", type=float, help="override the fractional order")
    parser.add_argument("--up-to", type=int, help="largest level written")
    parser.add_argument("--out", default="kernels.csv")
    parser.set_defaults(handler=run_kernels)


def run_kernels(args: argparse.Namespace) -> int:
    config = ExperimentController.resolve_config(args.config, args.preset, args.alpha)
    ExperimentController.run_kernels(config, args.out, args.mesh_csv, args.up_to)
    return 0
