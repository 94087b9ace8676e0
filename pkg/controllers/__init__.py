# Controllers package initialization
from .mesh_controller import MeshController
from .kernel_controller import KernelController
from .dgs_controller import DgsController
from .spectral_controller import SpectralController, SpectralPlan, spectral_plan
from .solver_controller import SolverController
from .experiment_controller import ExperimentController

__all__ = [
    "MeshController",
    "KernelController",
    "DgsController",
    "SpectralController",
    "SpectralPlan",
    "spectral_plan",
    "SolverController",
    "ExperimentController",
]
