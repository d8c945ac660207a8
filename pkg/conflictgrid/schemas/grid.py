"""
Grid geometry and per-cell conflict accumulators.
"""
import math
from enum import IntEnum

from pydantic import Field, model_validator

from conflictgrid.schemas.base import BaseSchema

# Con magnitudes tracked per cell for the increase-frequency indicator.
DEFAULT_MAGNITUDES: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0)


class TruthLabel(IntEnum):
    EMPTY = 0
    OCCUPIED = 1
    EXCLUDED = 2


class GridSpec(BaseSchema):
    """Square grid centred on `origin`."""
    side_length: float = Field(28.0, gt=0.0, description="meters")
    cell_size: float = Field(0.1016, gt=0.0, description="meters")
    origin_x: float = Field(0.0, description="world x of the grid centre")
    origin_y: float = Field(0.0, description="world y of the grid centre")

    @model_validator(mode="after")
    def check_cells(self) -> "GridSpec":
        if self.cells < 1:
            raise ValueError("grid must contain at least one cell")
        return self

    @property
    def cells(self) -> int:
        """Cells per side, rounded up."""
        return math.ceil(self.side_length / self.cell_size - 1e-9)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.cells, self.cells)

    @property
    def min_x(self) -> float:
        return self.origin_x - self.cells * self.cell_size / 2.0

    @property
    def min_y(self) -> float:
        return self.origin_y - self.cells * self.cell_size / 2.0

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (
            self.min_x + (ix + 0.5) * self.cell_size,
            self.min_y + (iy + 0.5) * self.cell_size,
        )

    def world_to_cell(self, x: float, y: float) -> tuple[int, int] | None:
        """Cell containing a world point, or None outside the grid."""
        ix = math.floor((x - self.min_x) / self.cell_size)
        iy = math.floor((y - self.min_y) / self.cell_size)
        if 0 <= ix < self.cells and 0 <= iy < self.cells:
            return ix, iy
        return None


class CellStats(BaseSchema):
    """Conflict history of one cell, in the compact form the indicators need."""
    n_updates: int = Field(0, ge=0)
    n_conflicting: int = Field(0, ge=0, description="updates with Con > 0")
    total_con: float = Field(0.0, ge=0.0)
    max_con: float = Field(0.0, ge=0.0)
    seq_sum: float = Field(0.0, ge=0.0, description="Con over the trailing conflicting run")
    seq_len: int = Field(0, ge=0)
    magnitude_counts: dict[float, int] = Field(
        default_factory=lambda: {m: 0 for m in DEFAULT_MAGNITUDES}
    )
    gambino_count: int = Field(0, ge=0)

    @model_validator(mode="after")
    def check_counts(self) -> "CellStats":
        if self.n_conflicting > self.n_updates:
            raise ValueError("n_conflicting exceeds n_updates")
        if self.seq_len > self.n_conflicting:
            raise ValueError("seq_len exceeds n_conflicting")
        if self.max_con > self.total_con + 1e-12:
            raise ValueError("max_con exceeds total_con")
        if any(count > self.n_conflicting for count in self.magnitude_counts.values()):
            raise ValueError("magnitude count exceeds n_conflicting")
        return self
