from __future__ import annotations

import logging

import numpy as np

from elastic_imaging.domain.config import PhantomConfig, ScenarioConfig
from elastic_imaging.domain.enums import PhantomKind
from elastic_imaging.domain.errors import PhantomError
from elastic_imaging.domain.medium import ElasticMedium, OmegaDomain
from elastic_imaging.services.forward.far_field import gauss_sphere
from elastic_imaging.services.spectrum.shapes import ball_grid

logger = logging.getLogger(__name__)

BOUNDARY_RTOL = 1e-6


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)

    def f(u):
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = np.exp(-1.0 / u[pos])
        return out

    a = f(t)
    b = f(1.0 - t)
    return a / (a + b)


def phantom_density(phantom: PhantomConfig, rho_tilde: float, domain_center, points) -> np.ndarray:
    """The analytic phantom rho_0 at arbitrary points (no Ω cut-off applied)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    A = phantom.amplitude
    if phantom.kind == PhantomKind.CONSTANT:
        return np.full(pts.shape[0], rho_tilde + A)
    if phantom.kind == PhantomKind.GAUSSIAN:
        c = np.asarray(phantom.center, dtype=float)
        r2 = np.sum((pts - c[None, :]) ** 2, axis=1)
        return rho_tilde + A * np.exp(-r2 / phantom.width ** 2)

    # layered: smooth step across a plane, windowed radially around the domain centre
    n = np.asarray(phantom.normal, dtype=float)
    n = n / np.linalg.norm(n)
    step = 0.5 * (1.0 + np.tanh((pts @ n - phantom.offset) / phantom.taper))
    r = np.linalg.norm(pts - np.asarray(domain_center, dtype=float)[None, :], axis=1)
    window = 1.0 - _smooth_step((r - phantom.window_inner) / (phantom.window_outer - phantom.window_inner))
    return rho_tilde + A * step * window


def build_phantom(config: ScenarioConfig) -> ElasticMedium:
    """Sample the phantom on the voxelised Ω ball; rho_0 must meet rho_tilde smoothly at ∂Ω."""
    dom = config.domain
    rho_t = config.medium.rho_tilde
    grid = ball_grid(dom.center, dom.radius, dom.resolution)
    rho = phantom_density(config.phantom, rho_t, dom.center, grid.centers())

    boundary_pts = np.asarray(dom.center)[None, :] + dom.radius * gauss_sphere(12).nodes
    checks = {
        "boundary cells": rho[grid.boundary_mask()],
        "∂Ω": phantom_density(config.phantom, rho_t, dom.center, boundary_pts),
    }
    for where, values in checks.items():
        worst = float(np.max(np.abs(values - rho_t)))
        if worst > BOUNDARY_RTOL * rho_t:
            raise PhantomError(
                f"phantom departs from rho_tilde by {worst:.3e} on the {where}; "
                f"it must match within {BOUNDARY_RTOL:g} * rho_tilde (shrink the width or move the centre inward)"
            )
    if np.any(rho <= 0):
        raise PhantomError("phantom density must stay positive")

    logger.info(
        "phantom %s on %d cells: rho in [%.4g, %.4g]",
        config.phantom.kind.value, grid.n_cells, float(rho.min()), float(rho.max()),
    )
    return ElasticMedium(
        lam=config.medium.lam,
        mu=config.medium.mu,
        rho_tilde=rho_t,
        grid=grid,
        rho_field=rho,
        domain=OmegaDomain(center=np.asarray(dom.center, dtype=float), radius=dom.radius),
    )
