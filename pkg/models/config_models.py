"""
Run configuration models (INI sections validated by pydantic)
"""
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator

from models.field_models import Grid2D


class MeshMode(str, Enum):
    """Time mesh layouts for simulate runs"""
    UNIFORM = "uniform"
    GRADED = "graded"
    ADAPTIVE = "adaptive"


class InitialData(str, Enum):
    """Initial conditions understood by the experiment runner"""
    RANDOM = "random"
    SMOOTH = "smooth"
    ZERO = "zero"


class ModelSection(BaseModel):
    alpha: float = Field(default=0.5, gt=0.0, lt=1.0)
    kappa: float = Field(default=0.01, gt=0.0)
    eps: float = Field(default=0.05, gt=0.0)


class MeshSection(BaseModel):
    mode: MeshMode = MeshMode.ADAPTIVE
    T0: float = Field(default=0.01, gt=0.0)
    N0: int = Field(default=30, ge=2)
    gamma: float = Field(default=2.0, ge=1.0)
    T: float = Field(default=100.0, gt=0.0)
    tau_min: float = Field(default=1e-3, gt=0.0)
    tau_max: float = Field(default=1e-1, gt=0.0)
    eta_user: float = Field(default=1e3, ge=0.0)
    ratio_cap: Optional[float] = Field(default=None, gt=1.0)


class SolverSection(BaseModel):
    fp_tol: float = Field(default=1e-12, gt=0.0)
    fp_max_iters: int = Field(default=500, ge=1)
    fp_stabilizer: float = Field(default=1.0, ge=0.0)
    seed: int = 42
    initial: InitialData = InitialData.RANDOM
    amplitude: float = Field(default=1e-3, ge=0.0)


class ConvergeSection(BaseModel):
    """Manufactured-solution sweep: N = N_base * 2^(m-1), m = 1..refinements"""
    T: float = Field(default=1.0, gt=0.0)
    gamma: float = Field(default=3.0, ge=1.0)
    N_base: int = Field(default=20, ge=2)
    refinements: int = Field(default=6, ge=2)


class OutputSection(BaseModel):
    ledger_csv: str = "ledger.csv"
    steps_csv: str = "steps.csv"
    mesh_csv: str = "mesh.csv"
    snapshot_dir: str = "snapshots"
    snapshot_times: List[float] = Field(default_factory=list)

    @field_validator("snapshot_times", mode="before")
    @classmethod
    def _split_times(cls, value):
        if isinstance(value, str):
            return [float(item) for item in value.replace(";", ",").split(",") if item.strip()]
        return value


class RunConfig(BaseModel):
    """Complete run configuration"""
    model: ModelSection = Field(default_factory=ModelSection)
    grid: Grid2D = Field(default_factory=Grid2D)
    mesh: MeshSection = Field(default_factory=MeshSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    converge: ConvergeSection = Field(default_factory=ConvergeSection)
    output: OutputSection = Field(default_factory=OutputSection)
