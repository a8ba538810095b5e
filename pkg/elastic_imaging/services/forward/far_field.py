from __future__ import annotations

import logging
from typing import Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from elastic_imaging.domain.enums import SphereRule
from elastic_imaging.domain.farfield import FarField, SphereGrid
from elastic_imaging.domain.grid import ComplexField3
from elastic_imaging.domain.medium import ElasticMedium
from elastic_imaging.services.kernels.elastic import farfield_phases

logger = logging.getLogger(__name__)


# -----------------------------
# Sphere quadratures
# -----------------------------
def gauss_sphere(n_theta: int) -> SphereGrid:
    """Gauss-Legendre in cos(theta) times 2 n_theta uniform azimuths; exact for degree < 2 n_theta."""
    if n_theta < 1:
        raise ValueError("n_theta must be >= 1")
    x, w = leggauss(n_theta)
    n_phi = 2 * n_theta
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    ct = np.repeat(x, n_phi)
    st = np.sqrt(np.clip(1.0 - ct ** 2, 0.0, None))
    ph = np.tile(phi, n_theta)
    nodes = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)
    nodes /= np.linalg.norm(nodes, axis=1, keepdims=True)
    weights = np.repeat(w, n_phi) * (2.0 * np.pi / n_phi)
    return SphereGrid(nodes=nodes, weights=weights, rule=SphereRule.GAUSS)


def fibonacci_sphere(n: int) -> SphereGrid:
    if n < 2:
        raise ValueError("need at least 2 nodes")
    k = np.arange(n) + 0.5
    ct = 1.0 - 2.0 * k / n
    st = np.sqrt(1.0 - ct ** 2)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    ph = golden * np.arange(n)
    nodes = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)
    nodes /= np.linalg.norm(nodes, axis=1, keepdims=True)
    weights = np.full(n, 4.0 * np.pi / n)
    return SphereGrid(nodes=nodes, weights=weights, rule=SphereRule.FIBONACCI)


def sphere_grid(rule: SphereRule, n_theta: int = 12, n_points: int = 256) -> SphereGrid:
    if rule == SphereRule.GAUSS:
        return gauss_sphere(n_theta)
    return fibonacci_sphere(n_points)


# -----------------------------
# Far fields of volume sources
# -----------------------------
def far_field_from_sources(directions, points, sources, omega: float, medium: ElasticMedium) -> Tuple[np.ndarray, np.ndarray]:
    """
    p- and s-parts at `directions` of the radiating field sum_n Gamma(., y_n) q_n.
    Returns two (M, 3) arrays.
    """
    dirs = np.asarray(directions, dtype=float).reshape(-1, 3)
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    q = np.asarray(sources, dtype=complex).reshape(-1, 3)
    if pts.shape[0] == 0:
        zero = np.zeros((dirs.shape[0], 3), dtype=complex)
        return zero, zero.copy()
    pp, sp = farfield_phases(dirs, pts, omega, medium)
    P = pp @ q
    S = sp @ q
    p = dirs * np.einsum("ki,ki->k", dirs, P)[:, None]
    s = S - dirs * np.einsum("ki,ki->k", dirs, S)[:, None]
    return p, s


def far_field(contrast_field: ComplexField3, medium: ElasticMedium, omega: float, sphere: SphereGrid) -> FarField:
    """
    Far field radiated by the contrast-weighted total field (alpha * U per cell):
    sources omega^2 * alpha * U * cell_volume at the cell centres.
    """
    g = contrast_field.grid
    q = omega ** 2 * g.cell_volume * contrast_field.values
    p, s = far_field_from_sources(sphere.nodes, g.centers(), q, omega, medium)
    return FarField(sphere=sphere, p_values=p, s_values=s)
