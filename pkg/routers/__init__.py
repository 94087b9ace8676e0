# Routers package initialization
from . import bounds, compat, converge, kernels, simulate, verify

# One entry per tfch subcommand, in help order
ROUTERS = [bounds, verify, converge, simulate, compat, kernels]

__all__ = ["ROUTERS", "bounds", "verify", "converge", "simulate", "compat", "kernels"]
