from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from elastic_imaging.domain.grid import VoxelGrid
from elastic_imaging.domain.medium import ElasticMedium


class Inclusion(BaseModel):
    """D = z + a B with density rho1 = c1 / a^2."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    z: np.ndarray
    a: float = Field(gt=0, lt=1)
    c1: float = Field(gt=0)
    gridB: VoxelGrid

    @field_validator("z", mode="before")
    @classmethod
    def _z(cls, v):
        return np.asarray(v, dtype=float).reshape(3)

    @property
    def rho1(self) -> float:
        return self.c1 / self.a ** 2

    def grid_D(self) -> VoxelGrid:
        return self.gridB.scaled(self.a).translated(self.z)

    def check_inside(self, medium: ElasticMedium) -> None:
        """Raise ValueError unless D sits inside Ω with one Ω-voxel margin and rho1 > max rho0."""
        if medium.domain is not None and medium.grid is not None:
            dom = medium.domain
            reach = float(np.linalg.norm(self.z - dom.center)) + self.a * self.gridB.circumradius()
            if reach + medium.grid.spacing > dom.radius:
                raise ValueError(
                    f"inclusion at z={self.z.tolist()} is not one voxel inside Ω "
                    f"(reach {reach:.4g} + {medium.grid.spacing:.4g} > {dom.radius:.4g})"
                )
        rho_max = medium.rho_tilde if medium.rho_field is None else float(medium.rho_field.max())
        if not self.rho1 > rho_max:
            raise ValueError(f"rho1 = {self.rho1:.4g} must exceed max rho0 = {rho_max:.4g}")
