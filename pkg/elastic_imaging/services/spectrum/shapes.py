from __future__ import annotations

from typing import Sequence

import numpy as np

from elastic_imaging.domain.enums import ShapeKind
from elastic_imaging.domain.grid import VoxelGrid


def _cube_indices(n: int) -> np.ndarray:
    return np.indices((n, n, n)).reshape(3, -1).T


def ball_grid(center: Sequence[float], radius: float, resolution: int) -> VoxelGrid:
    """Cells of a resolution^3 cube whose centres lie inside the ball."""
    if resolution < 1 or radius <= 0:
        raise ValueError("resolution >= 1 and radius > 0 required")
    c = np.asarray(center, dtype=float)
    h = 2.0 * radius / resolution
    origin = c - 0.5 * (resolution - 1) * h
    idx = _cube_indices(resolution)
    pts = origin[None, :] + idx * h
    keep = np.linalg.norm(pts - c[None, :], axis=1) <= radius
    return VoxelGrid(origin=origin, spacing=h, cells=idx[keep])


def _unit_volume(grid: VoxelGrid) -> VoxelGrid:
    return grid.scaled((1.0 / grid.total_volume) ** (1.0 / 3.0))


def reference_ball(resolution: int) -> VoxelGrid:
    """Voxelised ball centred at 0, rescaled so the voxel volume is exactly 1."""
    radius = (3.0 / (4.0 * np.pi)) ** (1.0 / 3.0)
    return _unit_volume(ball_grid((0.0, 0.0, 0.0), radius, resolution))


def reference_ellipsoid(resolution: int, axes: Sequence[float]) -> VoxelGrid:
    """Triaxial ellipsoid with semi-axis ratios `axes`; resolution counts cells along the longest axis."""
    ax = np.asarray(axes, dtype=float)
    if ax.shape != (3,) or np.any(ax <= 0):
        raise ValueError("axes must be three positive numbers")
    ax = ax / (4.0 * np.pi / 3.0 * np.prod(ax)) ** (1.0 / 3.0)
    h = 2.0 * ax.max() / resolution
    origin = -0.5 * (resolution - 1) * h * np.ones(3)
    idx = _cube_indices(resolution)
    pts = origin[None, :] + idx * h
    keep = np.sum((pts / ax[None, :]) ** 2, axis=1) <= 1.0
    return _unit_volume(VoxelGrid(origin=origin, spacing=h, cells=idx[keep]))


def reference_shape(kind: ShapeKind, resolution: int, axes: Sequence[float] = (1.0, 1.0, 1.0)) -> VoxelGrid:
    if kind == ShapeKind.BALL:
        return reference_ball(resolution)
    return reference_ellipsoid(resolution, axes)
