"""
Solver parameter, state and per-step record models
"""
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from models.field_models import EnergyLedgerEntry, Field2D, Grid2D
from models.kernel_models import KernelRow
from models.mesh_models import TimeMesh


class Scheme(str, Enum):
    """Time discretizations available to the stepper"""
    FBDF2 = "fbdf2"
    BDF2 = "bdf2"


class ModelParams(BaseModel):
    """Model coefficients, grid and fixed-point controls"""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(gt=0.0, lt=1.0, description="fractional order")
    kappa: float = Field(gt=0.0, description="mobility")
    eps: float = Field(gt=0.0, description="interface width")
    grid: Grid2D = Field(default_factory=Grid2D)
    fp_tol: float = Field(default=1e-12, gt=0.0)
    fp_max_iters: int = Field(default=500, ge=1)
    fp_stabilizer: float = Field(
        default=1.0, ge=0.0, description="S in the stabilized fixed-point splitting"
    )


class StepRecord(BaseModel):
    """Diagnostics of one time level"""
    n: int
    t: float
    tau: float
    ratio: float
    fp_iterations: int
    residual: float
    solvable_bound: float
    solvable_ok: bool
    ratio_ok: Optional[bool] = None
    energy_bound: Optional[float] = None
    energy_bound_ok: Optional[bool] = None


class IncrementHistory:
    """
    Growable buffer of spectral increments rfft2(phi^k - phi^{k-1}), k = 1..n

    Storage doubles on demand; ``spectra`` is a view of the filled part.
    """

    def __init__(self, spectral_shape: tuple, capacity: int = 64):
        self._buffer = np.zeros((max(capacity, 1),) + tuple(spectral_shape), dtype=complex)
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def append(self, increment_hat: np.ndarray) -> None:
        if self._size == self._buffer.shape[0]:
            grown = np.zeros((2 * self._size,) + self._buffer.shape[1:], dtype=complex)
            grown[: self._size] = self._buffer
            self._buffer = grown
        self._buffer[self._size] = increment_hat
        self._size += 1

    @property
    def spectra(self) -> np.ndarray:
        return self._buffer[: self._size]

    @property
    def nbytes(self) -> int:
        return self._buffer.nbytes


class SolverState(BaseModel):
    """Everything owned by one stepping context"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    scheme: Scheme = Scheme.FBDF2
    grid: Grid2D
    n: int = 0
    phi: np.ndarray
    phi_hat: np.ndarray
    mesh: TimeMesh
    increments: IncrementHistory
    kernel_rows: Dict[int, KernelRow] = Field(default_factory=dict)
    ledger: List[EnergyLedgerEntry] = Field(default_factory=list)
    records: List[StepRecord] = Field(default_factory=list)
    volume0: float = 0.0

    @property
    def field(self) -> Field2D:
        return Field2D(values=self.phi, grid=self.grid)

    @property
    def t(self) -> float:
        return float(self.mesh.levels[self.n])
