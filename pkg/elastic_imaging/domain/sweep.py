from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from elastic_imaging.domain.enums import DataSource
from elastic_imaging.domain.farfield import FarField
from elastic_imaging.domain.medium import PlaneWave
from elastic_imaging.domain.spectrum import ResonanceInfo


class LatticeSpec(BaseModel):
    """Regular n x n x n lattice of injection points, C-ordered (i, j, k)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    center: np.ndarray
    n: int = Field(ge=1)
    spacing: float = Field(gt=0)

    @field_validator("center", mode="before")
    @classmethod
    def _c(cls, v):
        return np.asarray(v, dtype=float).reshape(3)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def size(self) -> int:
        return self.n ** 3

    def indices(self) -> np.ndarray:
        return np.indices(self.shape).reshape(3, -1).T

    def positions(self) -> np.ndarray:
        """(n^3, 3) node coordinates in C order."""
        offs = (self.indices() - 0.5 * (self.n - 1)) * self.spacing
        return self.center[None, :] + offs


class NodeMeasurement(BaseModel):
    """Data recorded with the inclusion injected at one lattice node."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    index: int
    z: np.ndarray
    rho_true: float
    back_U: Optional[np.ndarray] = None
    bank_U: Optional[FarField] = None
    planted_diff: Optional[np.ndarray] = None
    planted_green: Optional[np.ndarray] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


class InjectionSweep(BaseModel):
    """
    Measurements before (V) and after (U) injection for every lattice node,
    all for the single incident wave `wave`. Banks live on the mirrored sphere.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    lattice: LatticeSpec
    wave: PlaneWave
    back_direction: np.ndarray
    back_V: np.ndarray
    bank_V: Optional[FarField] = None
    anchors: np.ndarray
    resonance: ResonanceInfo
    source: DataSource
    delta: float = Field(default=0.0, ge=0)
    delta1: float = Field(default=0.0, ge=0)
    seed: int = 0
    nodes: List[NodeMeasurement]

    @field_validator("anchors", mode="before")
    @classmethod
    def _anchors(cls, v):
        return np.asarray(v, dtype=float).reshape(-1, 3)
