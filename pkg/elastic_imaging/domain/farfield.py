from __future__ import annotations

from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from elastic_imaging.domain.enums import SphereRule

FOUR_PI = 4.0 * np.pi


def tangent_frames(directions) -> Tuple[np.ndarray, np.ndarray]:
    """
    Deterministic orthonormal tangents (t1, t2) for each unit direction d,
    with (t1, t2, d) right-handed.
    """
    d = np.asarray(directions, dtype=float).reshape(-1, 3)
    ref = np.tile(np.array([0.0, 0.0, 1.0]), (d.shape[0], 1))
    polar = np.abs(d[:, 2]) > 0.9
    ref[polar] = np.array([1.0, 0.0, 0.0])
    t1 = np.cross(ref, d)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(d, t1)
    return t1, t2


class SphereGrid(BaseModel):
    """Quadrature nodes on the unit sphere; weights sum to 4π."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    nodes: np.ndarray
    weights: np.ndarray
    rule: SphereRule = SphereRule.GAUSS

    @field_validator("nodes", mode="before")
    @classmethod
    def _nodes(cls, v):
        return np.asarray(v, dtype=float).reshape(-1, 3)

    @field_validator("weights", mode="before")
    @classmethod
    def _weights(cls, v):
        return np.asarray(v, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def _check(self) -> "SphereGrid":
        if self.nodes.shape[0] != self.weights.shape[0]:
            raise ValueError("one weight per node")
        if np.any(np.abs(np.linalg.norm(self.nodes, axis=1) - 1.0) > 1e-12):
            raise ValueError("sphere nodes must be unit vectors")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if abs(self.weights.sum() - FOUR_PI) > 1e-10:
            raise ValueError(f"weights must sum to 4π, got {self.weights.sum()!r}")
        return self

    @property
    def size(self) -> int:
        return int(self.nodes.shape[0])

    def mirrored(self) -> "SphereGrid":
        return SphereGrid(nodes=-self.nodes, weights=self.weights, rule=self.rule)

    def tangents(self) -> Tuple[np.ndarray, np.ndarray]:
        return tangent_frames(self.nodes)

    def matches(self, other: "SphereGrid", atol: float = 1e-12) -> bool:
        return (
            self.size == other.size
            and np.allclose(self.nodes, other.nodes, rtol=0.0, atol=atol)
            and np.allclose(self.weights, other.weights, rtol=0.0, atol=atol)
        )


class FarField(BaseModel):
    """
    p- and s-parts of a far-field pattern on a sphere grid. The p-part is
    parallel to each node direction, the s-part orthogonal to it.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    sphere: SphereGrid
    p_values: np.ndarray
    s_values: np.ndarray

    @field_validator("p_values", "s_values", mode="before")
    @classmethod
    def _vals(cls, v):
        return np.asarray(v, dtype=complex).reshape(-1, 3)

    @model_validator(mode="after")
    def _polarisation(self) -> "FarField":
        n = self.sphere.size
        if self.p_values.shape[0] != n or self.s_values.shape[0] != n:
            raise ValueError("one far-field value per sphere node")
        x = self.sphere.nodes
        p_mag = np.linalg.norm(self.p_values, axis=1)
        s_mag = np.linalg.norm(self.s_values, axis=1)
        cross = np.linalg.norm(np.cross(self.p_values, x), axis=1)
        dot = np.abs(np.einsum("ki,ki->k", self.s_values, x))
        # round-off floor relative to the whole pattern
        floor = 1e-14 * max(float(p_mag.max(initial=0.0)), float(s_mag.max(initial=0.0)))
        if np.any(cross > 1e-8 * p_mag + floor):
            raise ValueError("p-part must be parallel to the observation direction")
        if np.any(dot > 1e-8 * s_mag + floor):
            raise ValueError("s-part must be orthogonal to the observation direction")
        return self

    @property
    def total(self) -> np.ndarray:
        return self.p_values + self.s_values

    def __add__(self, other: "FarField") -> "FarField":
        return FarField(sphere=self.sphere, p_values=self.p_values + other.p_values, s_values=self.s_values + other.s_values)

    def __sub__(self, other: "FarField") -> "FarField":
        return FarField(sphere=self.sphere, p_values=self.p_values - other.p_values, s_values=self.s_values - other.s_values)

    def scaled(self, c: complex) -> "FarField":
        return FarField(sphere=self.sphere, p_values=c * self.p_values, s_values=c * self.s_values)

    def l2_norm(self) -> float:
        mag2 = np.sum(np.abs(self.p_values) ** 2 + np.abs(self.s_values) ** 2, axis=1)
        return float(np.sqrt(np.sum(self.sphere.weights * mag2)))
