from __future__ import annotations

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from elastic_imaging.domain.errors import ZeroDetuningError
from elastic_imaging.domain.grid import VoxelGrid


class EigenSystem(BaseModel):
    """
    Eigenpairs of the Newtonian operator on a voxel grid, sorted by
    descending |eigenvalue|. eigenfunctions[n] has shape (n_cells, 3) and
    unit volume-weighted L2 norm; moments[n] is its volume integral.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: VoxelGrid
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    moments: np.ndarray

    @property
    def size(self) -> int:
        return int(self.eigenvalues.shape[0])

    def moment_norms(self) -> np.ndarray:
        return np.linalg.norm(self.moments, axis=1)

    def gram(self) -> np.ndarray:
        flat = self.eigenfunctions.reshape(self.size, -1)
        return flat @ flat.T * self.grid.cell_volume


class ResonanceInfo(BaseModel):
    """Working resonance n0 of the inclusion and the detuned incident frequency."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n0: int
    lambda_n0_B: float = Field(gt=0)
    omega_n0: float = Field(gt=0)
    moment: np.ndarray
    E_B: np.ndarray
    a: float = Field(gt=0, lt=1)
    c1: float = Field(gt=0)
    h: float = Field(default=0.5, gt=0, lt=1)
    b: float = Field(default=1.0, ge=0)
    sign: int = 1
    omega_inc: Optional[float] = None
    degenerate: bool = False
    cluster: List[int] = Field(default_factory=list)

    @field_validator("moment", mode="before")
    @classmethod
    def _m(cls, v):
        return np.asarray(v, dtype=float).reshape(3)

    @field_validator("E_B", mode="before")
    @classmethod
    def _e(cls, v):
        return np.asarray(v, dtype=float).reshape(3, 3)

    @property
    def rho1(self) -> float:
        return self.c1 / self.a ** 2

    @property
    def lambda_n0_D(self) -> float:
        return self.a ** 2 * self.lambda_n0_B

    @property
    def omega(self) -> float:
        if self.omega_inc is None:
            raise ValueError("incident frequency not set")
        return self.omega_inc

    def detuning(self) -> float:
        """omega_n0^2 - omega^2"""
        return self.omega_n0 ** 2 - self.omega ** 2

    def dominant_factor(self) -> float:
        """c1 a omega^2 omega_n0^2 / (omega_n0^2 - omega^2)"""
        d = self.detuning()
        if d == 0.0:
            raise ZeroDetuningError("incident frequency equals the resonance; detune with b > 0")
        return self.c1 * self.a * self.omega ** 2 * self.omega_n0 ** 2 / d


class ScalingReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    a: float
    eigen_ratios: np.ndarray
    moment_ratios: np.ndarray
    clusters: List[List[int]]

    @property
    def expected_eigen_ratio(self) -> float:
        return self.a ** 2

    @property
    def expected_moment_ratio(self) -> float:
        return self.a ** 1.5

    def max_eigen_deviation(self) -> float:
        return float(np.max(np.abs(self.eigen_ratios / self.expected_eigen_ratio - 1.0)))

    def max_moment_deviation(self) -> float:
        ok = np.isfinite(self.moment_ratios)
        if not np.any(ok):
            return 0.0
        return float(np.max(np.abs(self.moment_ratios[ok] / self.expected_moment_ratio - 1.0)))
