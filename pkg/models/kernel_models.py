"""
Discrete convolution kernel data models
"""
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class FracWeightQuery(BaseModel):
    """Arguments of the fractional weight t^(beta-1) / Gamma(beta)"""
    beta: float = Field(gt=0.0)
    t: float = Field(gt=0.0)


class KernelRow(BaseModel):
    """
    All convolution coefficients of one time level n, indexed by lag j = n - k.

    ``a[j]`` is a^{(n)}_{j}, so ``a[0]`` belongs to the newest interval and
    ``a[n-1]`` to the first one. The same holds for eta, B, a_hat and A.
    ``local`` stores the two coefficients of the BDF2-like local term
    (multipliers of the increments at levels n and n-1).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n: int = Field(ge=1)
    alpha: float
    a: np.ndarray
    eta: np.ndarray
    B: np.ndarray
    a_hat: np.ndarray
    A: np.ndarray
    local: np.ndarray

    @field_validator("a", "eta", "B", "a_hat", "A", "local", mode="before")
    @classmethod
    def _frozen_array(cls, value):
        array = np.array(value, dtype=float)
        array.setflags(write=False)
        return array


class BridgingPair(BaseModel):
    """Bridging integrals I^{(n)}_{n-k} and J^{(n)}_{n-k}; J is None for k = n"""
    I: float
    J: Optional[float] = None


class KernelPropertyReport(BaseModel):
    """Verdicts and worst relative margins of a family of kernel inequalities"""
    alpha: float
    up_to_n: int
    hypothesis_ok: bool = True
    hypothesis_violations: List[int] = Field(
        default_factory=list, description="levels k whose ratio breaks the hypothesis"
    )
    verdicts: Dict[str, bool] = Field(default_factory=dict)
    worst_margins: Dict[str, float] = Field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.verdicts.values())
