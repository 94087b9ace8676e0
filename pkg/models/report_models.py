"""
Certification, experiment and CLI report models
"""
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class Command(str, Enum):
    """CLI subcommands"""
    BOUNDS = "bounds"
    VERIFY = "verify"
    CONVERGE = "converge"
    SIMULATE = "simulate"
    COMPAT = "compat"
    KERNELS = "kernels"


class RunSpec(BaseModel):
    """Resolved invocation of one CLI command"""
    command: Command
    config_path: Optional[str] = None
    preset: Optional[str] = None
    output: Optional[str] = None
    seed: Optional[int] = None


class SuiteResult(BaseModel):
    """Outcome of one randomized certification suite"""
    name: str
    trials: int = 0
    checks: int = 0
    skipped: int = 0
    violations: int = 0
    worst_margin: Optional[float] = None
    notes: List[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, margin: float, tolerance: float) -> None:
        """Account one inequality check whose margin must be >= -tolerance"""
        self.checks += 1
        if self.worst_margin is None or margin < self.worst_margin:
            self.worst_margin = float(margin)
        if margin < -tolerance:
            self.violations += 1


class VerifyReport(BaseModel):
    """JSON document written by `tfch verify`"""
    seed: int
    passed: bool
    suites: Dict[str, SuiteResult]


class BoundsRow(BaseModel):
    alpha: float
    r_star: float
    gamma_max: float
    three_minus_alpha: float


class ConvergenceRow(BaseModel):
    alpha: float
    gamma: float
    N: int
    tau_max: float
    error: float
    order: Optional[float] = None
    expected_order: float


class CompatRow(BaseModel):
    """FBDF2(alpha) against BDF2 on a shared mesh"""
    alpha: float
    distance: float
    max_abs_a_hat: float
