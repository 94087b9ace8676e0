"""
Discrete gradient structure data models
"""
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from models.mesh_models import TimeMesh


class GStateScalar(BaseModel):
    """Scalar increment history w_k = v^k - v^{k-1}, k = 1..n, on a mesh"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n: int = Field(ge=1)
    history: np.ndarray
    mesh: TimeMesh
    alpha: float = Field(gt=0.0, lt=1.0)

    @field_validator("history", mode="before")
    @classmethod
    def _as_history(cls, value):
        return np.array(value, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def _length_matches(self):
        if self.history.size != self.n:
            raise ValueError(f"history holds {self.history.size} increments, expected {self.n}")
        return self


class DgsReport(BaseModel):
    """Both sides of the discrete gradient structure inequality at level n"""
    n: int
    lhs: float
    rhs: float
    margin: float
    scale: float
    hypothesis_ok: bool = True

    @property
    def relative_margin(self) -> float:
        return self.margin / self.scale if self.scale > 0 else self.margin
