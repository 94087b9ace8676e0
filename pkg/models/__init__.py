# Models package initialization
from .mesh_models import GradingInfo, TimeMesh, RatioBounds, RatioViolation, RatioReport
from .kernel_models import FracWeightQuery, KernelRow, BridgingPair, KernelPropertyReport
from .dgs_models import GStateScalar, DgsReport
from .field_models import Grid2D, Field2D, EnergyLedgerEntry
from .solver_models import Scheme, ModelParams, StepRecord, IncrementHistory, SolverState
from .config_models import (
    MeshMode,
    InitialData,
    ModelSection,
    MeshSection,
    SolverSection,
    ConvergeSection,
    OutputSection,
    RunConfig
)
from .report_models import (
    Command,
    RunSpec,
    SuiteResult,
    VerifyReport,
    BoundsRow,
    ConvergenceRow,
    CompatRow
)

__all__ = [
    # Mesh models
    "GradingInfo",
    "TimeMesh",
    "RatioBounds",
    "RatioViolation",
    "RatioReport",
    # Kernel models
    "FracWeightQuery",
    "KernelRow",
    "BridgingPair",
    "KernelPropertyReport",
    # Discrete gradient structure models
    "GStateScalar",
    "DgsReport",
    # Field models
    "Grid2D",
    "Field2D",
    "EnergyLedgerEntry",
    # Solver models
    "Scheme",
    "ModelParams",
    "StepRecord",
    "IncrementHistory",
    "SolverState",
    # Configuration models
    "MeshMode",
    "InitialData",
    "ModelSection",
    "MeshSection",
    "SolverSection",
    "ConvergeSection",
    "OutputSection",
    "RunConfig",
    # Report models
    "Command",
    "RunSpec",
    "SuiteResult",
    "VerifyReport",
    "BoundsRow",
    "ConvergenceRow",
    "CompatRow",
]
