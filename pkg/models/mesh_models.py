"""
Time mesh and step-ratio data models
"""
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class GradingInfo(BaseModel):
    """Metadata attached to graded meshes t_k = T0 (k/N0)^gamma"""
    T0: float
    N0: int
    gamma: float
    max_ratio: float = Field(description="r_2 = 2^gamma - 1, the largest ratio of the mesh")
    alpha: Optional[float] = None
    r_star: Optional[float] = None
    admissible: Optional[bool] = Field(
        default=None, description="max_ratio < r*(alpha) for the supplied alpha"
    )
    gamma_max: Optional[float] = None


class TimeMesh(BaseModel):
    """
    Nonuniform time levels t_0 < t_1 < ... < t_N

    Steps and ratios are derived on access: tau_k = t_k - t_{k-1} and
    r_k = tau_k / tau_{k-1} with r_1 = 0. Arrays use 1-based level indices,
    so ``steps[k]`` is tau_k and ``steps[0]`` is an unused 0.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    levels: np.ndarray
    grading: Optional[GradingInfo] = None

    @field_validator("levels", mode="before")
    @classmethod
    def _as_levels(cls, value):
        levels = np.array(value, dtype=float).reshape(-1)
        if levels.size < 2:
            raise ValueError("a time mesh needs at least two levels")
        if not np.all(np.isfinite(levels)):
            raise ValueError("time levels must be finite")
        if np.any(np.diff(levels) <= 0.0):
            raise ValueError("time levels must be strictly increasing")
        levels.setflags(write=False)
        return levels

    @property
    def N(self) -> int:
        """Number of steps"""
        return self.levels.size - 1

    @property
    def T(self) -> float:
        return float(self.levels[-1])

    @property
    def steps(self) -> np.ndarray:
        steps = np.zeros_like(self.levels)
        steps[1:] = np.diff(self.levels)
        return steps

    @property
    def ratios(self) -> np.ndarray:
        steps = self.steps
        ratios = np.zeros_like(steps)
        ratios[2:] = steps[2:] / steps[1:-1]
        return ratios

    def tau(self, k: int) -> float:
        return float(self.levels[k] - self.levels[k - 1])

    def ratio(self, k: int) -> float:
        """r_k, with r_1 = 0"""
        if k <= 1:
            return 0.0
        return self.tau(k) / self.tau(k - 1)

    def extend(self, tau: float) -> "TimeMesh":
        """New mesh with one more level t_{N+1} = t_N + tau"""
        return TimeMesh(levels=np.append(self.levels, self.levels[-1] + tau))

    def truncate(self, n: int) -> "TimeMesh":
        """Mesh restricted to levels t_0..t_n"""
        return TimeMesh(levels=self.levels[: n + 1], grading=self.grading)


class RatioBounds(BaseModel):
    """Admissible window R_lower <= r_k < r_upper for step ratios"""
    alpha: float = Field(gt=0.0, le=1.0)
    R_lower: float
    r_upper: float

    @model_validator(mode="after")
    def _ordered(self):
        if not self.R_lower < self.r_upper:
            raise ValueError("R_lower must be below r_upper")
        return self


class RatioViolation(BaseModel):
    """Single step ratio outside the admissible window"""
    k: int
    ratio: float
    reason: str


class RatioReport(BaseModel):
    """Result of checking a mesh against RatioBounds"""
    bounds: RatioBounds
    checked: int
    violations: List[RatioViolation] = []

    @property
    def ok(self) -> bool:
        return not self.violations
