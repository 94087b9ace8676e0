"""
Periodic grid, grid function and energy ledger models
"""
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Grid2D(BaseModel):
    """Uniform periodic grid on (0, Lx) x (0, Ly) with Mx x My points"""
    model_config = ConfigDict(frozen=True)

    Mx: int = Field(default=64, ge=8)
    My: int = Field(default=64, ge=8)
    Lx: float = Field(default=2 * math.pi, gt=0.0)
    Ly: float = Field(default=2 * math.pi, gt=0.0)

    @field_validator("Mx", "My")
    @classmethod
    def _even(cls, value: int) -> int:
        if value % 2:
            raise ValueError("grid resolution must be even")
        return value

    @property
    def shape(self) -> tuple:
        return (self.Mx, self.My)

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def cell_area(self) -> float:
        return self.area / (self.Mx * self.My)

    def coordinates(self) -> tuple:
        """Meshgrid (x, y) of collocation points, 'ij' indexing"""
        x = np.arange(self.Mx) * (self.Lx / self.Mx)
        y = np.arange(self.My) * (self.Ly / self.My)
        return np.meshgrid(x, y, indexing="ij")


class Field2D(BaseModel):
    """Real samples of a periodic function on a Grid2D"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    grid: Grid2D

    @field_validator("values", mode="before")
    @classmethod
    def _as_values(cls, value):
        array = np.array(value, dtype=float)
        if not np.all(np.isfinite(array)):
            raise ValueError("field values must be finite")
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _shape_matches(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        return self

    @classmethod
    def zeros(cls, grid: Grid2D) -> "Field2D":
        return cls(values=np.zeros(grid.shape), grid=grid)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))


class EnergyLedgerEntry(BaseModel):
    """One row of the energy ledger; E_alpha is filled one step in arrears"""
    n: int
    t: float
    E: float
    E_alpha: Optional[float] = None
    tau: float
    volume: float
