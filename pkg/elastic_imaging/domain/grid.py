from __future__ import annotations

from typing import Dict, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class VoxelGrid(BaseModel):
    """
    A set of equal cubic cells. Cell k is centred at origin + cells[k] * spacing.
    Used for the reference shape B, the inclusion D and the background domain.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    origin: np.ndarray
    spacing: float = Field(gt=0)
    cells: np.ndarray

    @field_validator("origin", mode="before")
    @classmethod
    def _origin(cls, v):
        arr = np.asarray(v, dtype=float).reshape(3)
        return arr

    @field_validator("cells", mode="before")
    @classmethod
    def _cells(cls, v):
        return np.asarray(v, dtype=np.int64).reshape(-1, 3)

    @model_validator(mode="after")
    def _check(self) -> "VoxelGrid":
        if self.cells.shape[0] == 0:
            raise ValueError("grid must contain at least one cell")
        if np.unique(self.cells, axis=0).shape[0] != self.cells.shape[0]:
            raise ValueError("occupied cells must be distinct")
        return self

    @property
    def cell_volume(self) -> float:
        return self.spacing ** 3

    @property
    def n_cells(self) -> int:
        return int(self.cells.shape[0])

    @property
    def total_volume(self) -> float:
        return self.n_cells * self.cell_volume

    def centers(self) -> np.ndarray:
        return self.origin[None, :] + self.cells.astype(float) * self.spacing

    def scaled(self, a: float) -> "VoxelGrid":
        """Same topology, every length multiplied by a (origin included)."""
        return VoxelGrid(origin=self.origin * a, spacing=self.spacing * a, cells=self.cells)

    def translated(self, t) -> "VoxelGrid":
        return VoxelGrid(origin=self.origin + np.asarray(t, dtype=float), spacing=self.spacing, cells=self.cells)

    def circumradius(self, center=None) -> float:
        c = np.zeros(3) if center is None else np.asarray(center, dtype=float)
        # farthest cell corner
        r = np.linalg.norm(self.centers() - c[None, :], axis=1).max()
        return float(r + 0.5 * np.sqrt(3.0) * self.spacing)

    def _index(self) -> Dict[Tuple[int, int, int], int]:
        return {tuple(int(v) for v in c): k for k, c in enumerate(self.cells)}

    def locate(self, points) -> np.ndarray:
        """
        Index of the cell containing each point, -1 if the point lies in no cell.
        Points on a shared face go to the cell with the larger index vector.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        ijk = np.floor((pts - self.origin[None, :]) / self.spacing + 0.5).astype(np.int64)
        lookup = self._index()
        return np.array([lookup.get(tuple(int(v) for v in row), -1) for row in ijk], dtype=np.int64)

    def boundary_mask(self) -> np.ndarray:
        """True for cells missing at least one of their six face neighbours."""
        lookup = self._index()
        steps = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
        out = np.zeros(self.n_cells, dtype=bool)
        for k, c in enumerate(self.cells):
            for s in steps:
                if (int(c[0]) + s[0], int(c[1]) + s[1], int(c[2]) + s[2]) not in lookup:
                    out[k] = True
                    break
        return out


class ComplexField3(BaseModel):
    """Complex 3-vector per occupied cell of `grid`."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: VoxelGrid
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _values(cls, v):
        return np.asarray(v, dtype=complex).reshape(-1, 3)

    @model_validator(mode="after")
    def _count(self) -> "ComplexField3":
        if self.values.shape[0] != self.grid.n_cells:
            raise ValueError(
                f"value count {self.values.shape[0]} != occupied-cell count {self.grid.n_cells}"
            )
        return self

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume))
