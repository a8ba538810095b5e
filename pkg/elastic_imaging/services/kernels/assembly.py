"""
Dense volume-operator assembly (midpoint rule) for the Kelvin and Kupradze kernels.

Blocks are laid out point-major: rows 3i..3i+2 belong to target i.
"""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from elastic_imaging.domain.medium import ElasticMedium
from elastic_imaging.services.kernels.elastic import (
    kelvin_self_block,
    kelvin_tensor,
    kupradze_self_block,
    kupradze_tensor,
)

logger = logging.getLogger(__name__)

ROW_CHUNK = 96


def _tensor(rvec: np.ndarray, omega: float, medium: ElasticMedium) -> np.ndarray:
    if omega == 0.0:
        return kelvin_tensor(rvec, medium)
    return kupradze_tensor(rvec, omega, medium)


def self_block(cell_volume: float, omega: float, medium: ElasticMedium) -> np.ndarray:
    if omega == 0.0:
        return kelvin_self_block(cell_volume, medium)
    return kupradze_self_block(cell_volume, omega, medium)


def _flatten(blocks: np.ndarray) -> np.ndarray:
    m, n = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(3 * m, 3 * n)


def volume_operator(points: np.ndarray, cell_volume: float, omega: float, medium: ElasticMedium) -> np.ndarray:
    """
    T with T_ij = Gamma(x_i, x_j) * vol for i != j and the analytic ball
    self-integral on the diagonal. omega == 0 gives the Newtonian (Kelvin) operator.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = pts.shape[0]
    dtype = float if omega == 0.0 else complex
    out = np.empty((3 * n, 3 * n), dtype=dtype)
    diag = self_block(cell_volume, omega, medium)

    for i0 in range(0, n, ROW_CHUNK):
        i1 = min(i0 + ROW_CHUNK, n)
        rvec = pts[i0:i1, None, :] - pts[None, :, :]
        rows = np.arange(i0, i1)
        # placeholder separation on the diagonal, overwritten below
        rvec[rows - i0, rows, :] = (1.0, 0.0, 0.0)
        blocks = _tensor(rvec, omega, medium) * cell_volume
        blocks[rows - i0, rows] = diag
        out[3 * i0:3 * i1, :] = _flatten(blocks)
    logger.debug("assembled volume operator: %d cells, omega=%g", n, omega)
    return out


def point_cell_kernel(
    targets: np.ndarray,
    centers: np.ndarray,
    cell_volume: float,
    omega: float,
    medium: ElasticMedium,
    host: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Kernel between arbitrary points and the cells of a grid, shape (P, N, 3, 3).
    A point lying inside cell c sees that cell through its averaged kernel
    self_block / vol instead of the singular midpoint value.
    """
    tg = np.asarray(targets, dtype=float).reshape(-1, 3)
    cc = np.asarray(centers, dtype=float).reshape(-1, 3)
    rvec = tg[:, None, :] - cc[None, :, :]
    if host is None:
        return _tensor(rvec, omega, medium)
    host = np.asarray(host, dtype=np.int64).reshape(-1)
    inside = np.nonzero(host >= 0)[0]
    rvec[inside, host[inside], :] = (1.0, 0.0, 0.0)
    out = _tensor(rvec, omega, medium)
    out[inside, host[inside]] = self_block(cell_volume, omega, medium) / cell_volume
    return out


def flatten_blocks(blocks: np.ndarray) -> np.ndarray:
    return _flatten(blocks)
