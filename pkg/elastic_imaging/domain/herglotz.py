from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from elastic_imaging.domain.farfield import SphereGrid


class HerglotzKernel(BaseModel):
    """
    Scalar kernels on the sphere: g_p(d) = d * gp(d) and
    g_s(d) = gs[0](d) t1(d) + gs[1](d) t2(d), with (t1, t2) = perp_field.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    sphere: SphereGrid
    gp_values: np.ndarray
    gs_values: np.ndarray
    perp_field: np.ndarray

    @field_validator("gp_values", mode="before")
    @classmethod
    def _gp(cls, v):
        return np.asarray(v, dtype=complex).reshape(-1)

    @field_validator("gs_values", mode="before")
    @classmethod
    def _gs(cls, v):
        arr = np.asarray(v, dtype=complex)
        if arr.ndim == 1:
            # single-tangent form
            arr = np.stack([arr, np.zeros_like(arr)], axis=1)
        return arr.reshape(-1, 2)

    @field_validator("perp_field", mode="before")
    @classmethod
    def _perp(cls, v):
        arr = np.asarray(v, dtype=float)
        if arr.ndim == 2:
            arr = arr[:, None, :]
        return arr

    @model_validator(mode="after")
    def _check(self) -> "HerglotzKernel":
        n = self.sphere.size
        if self.gp_values.shape[0] != n or self.gs_values.shape[0] != n:
            raise ValueError("one kernel value per sphere node")
        if self.perp_field.shape[0] != n or self.perp_field.shape[2] != 3:
            raise ValueError("perp_field must be (nodes, k, 3)")
        dots = np.einsum("kji,ki->kj", self.perp_field, self.sphere.nodes)
        if np.any(np.abs(dots) > 1e-10):
            raise ValueError("perp_field must be tangent to the sphere")
        return self

    @classmethod
    def zeros(cls, sphere: SphereGrid) -> "HerglotzKernel":
        t1, t2 = sphere.tangents()
        return cls(
            sphere=sphere,
            gp_values=np.zeros(sphere.size, dtype=complex),
            gs_values=np.zeros((sphere.size, 2), dtype=complex),
            perp_field=np.stack([t1, t2], axis=1),
        )

    def _gs_full(self) -> np.ndarray:
        k = self.perp_field.shape[1]
        return self.gs_values[:, :k]

    def vector_kernels(self) -> Tuple[np.ndarray, np.ndarray]:
        """(g_p, g_s) as complex 3-vectors per node."""
        gp = self.gp_values[:, None] * self.sphere.nodes
        gs = np.einsum("kj,kji->ki", self._gs_full(), self.perp_field)
        return gp, gs

    def p_norm(self) -> float:
        return float(np.sqrt(np.sum(self.sphere.weights * np.abs(self.gp_values) ** 2)))

    def s_norm(self) -> float:
        mag2 = np.sum(np.abs(self._gs_full()) ** 2, axis=1)
        return float(np.sqrt(np.sum(self.sphere.weights * mag2)))

    def norm(self) -> float:
        return float(np.hypot(self.p_norm(), self.s_norm()))


class MeasurementSurfaceK(BaseModel):
    """Quadrature on the sphere ∂K = center + radius * S^2."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    center: np.ndarray
    radius: float = Field(gt=0)
    nodes: np.ndarray
    weights: np.ndarray

    @field_validator("center", mode="before")
    @classmethod
    def _c(cls, v):
        return np.asarray(v, dtype=float).reshape(3)

    @model_validator(mode="after")
    def _check(self) -> "MeasurementSurfaceK":
        if np.any(self.weights <= 0):
            raise ValueError("∂K weights must be positive")
        return self

    @classmethod
    def ball(cls, sphere: SphereGrid, radius: float, center=(0.0, 0.0, 0.0)) -> "MeasurementSurfaceK":
        c = np.asarray(center, dtype=float)
        return cls(
            center=c,
            radius=radius,
            nodes=c[None, :] + radius * sphere.nodes,
            weights=radius ** 2 * sphere.weights,
        )

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.linalg.norm(pts - self.center[None, :], axis=1) < self.radius


class KernelFit(BaseModel):
    """A minimum-norm kernel with its regularisation record."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kernel: HerglotzKernel
    alpha: float
    discrepancy: float
    kernel_norm: float
    collision_warning: bool = False
    sweep: List[Tuple[float, float, float]] = Field(default_factory=list)


class ExteriorFields(BaseModel):
    """Fields recovered at exterior points by back-projection, each (P, 3)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    points: np.ndarray
    Vt: np.ndarray
    Vs: np.ndarray
    Ut: Optional[np.ndarray] = None
    Us: Optional[np.ndarray] = None
    fits: List[List[KernelFit]] = Field(default_factory=list)

    @property
    def difference(self) -> Optional[np.ndarray]:
        """U^s - V^s"""
        if self.Us is None:
            return None
        return self.Us - self.Vs
