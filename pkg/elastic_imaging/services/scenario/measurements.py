"""
Synthetic before/after injection data for every lattice node.

The background solve, its far fields and the Green's columns at the anchors
are z-independent and computed once. Per node the data come either from the
full inclusion solve or from the dominant resonant term (surrogate).
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from elastic_imaging.domain.config import ScenarioConfig
from elastic_imaging.domain.enums import DataSource
from elastic_imaging.domain.errors import ElasticImagingError, SourceInsideDomainError
from elastic_imaging.domain.farfield import FarField, SphereGrid, tangent_frames
from elastic_imaging.domain.grid import VoxelGrid
from elastic_imaging.domain.inclusion import Inclusion
from elastic_imaging.domain.medium import ElasticMedium, PlaneWave
from elastic_imaging.domain.spectrum import EigenSystem, ResonanceInfo
from elastic_imaging.domain.sweep import InjectionSweep, LatticeSpec, NodeMeasurement
from elastic_imaging.services.forward.asymptotics import backscatter_direction, dominant_factor, green_farfield_moment
from elastic_imaging.services.forward.far_field import sphere_grid
from elastic_imaging.services.forward.lippmann_schwinger import (
    BackgroundSolver,
    inclusion_far_field_at,
    inclusion_scattered_at,
    solve_with_inclusion,
)
from elastic_imaging.services.spectrum.newtonian import build_resonance

logger = logging.getLogger(__name__)

_NODE_ERRORS = (ElasticImagingError, ValueError, ArithmeticError, np.linalg.LinAlgError)
NOISE_MODEL = "multiplicative complex Gaussian, relative to each sample's p/s magnitude"


# -----------------------------
# Lattice and incidence
# -----------------------------
def build_lattice(config: ScenarioConfig, grid: VoxelGrid) -> LatticeSpec:
    """
    Lattice centred on the Ω cell containing sweep.center, spacing stride * h.
    Every node must keep two lattice spacings from ∂Ω so the difference
    stencil stays on interior data.
    """
    cell = int(grid.locate(np.asarray(config.sweep.center, dtype=float))[0])
    if cell < 0:
        raise ValueError(f"sweep centre {list(config.sweep.center)} is outside the Ω grid")
    center = grid.centers()[cell]
    lattice = LatticeSpec(center=center, n=config.sweep.n, spacing=config.sweep.stride * grid.spacing)

    dom_c = np.asarray(config.domain.center, dtype=float)
    reach = float(np.linalg.norm(lattice.positions() - dom_c[None, :], axis=1).max())
    margin = config.domain.radius - reach
    if margin < 2.0 * lattice.spacing:
        raise ValueError(
            f"lattice reaches {reach:.4g} from the Ω centre; nodes need a margin of 2 * spacing = "
            f"{2.0 * lattice.spacing:.4g} to ∂Ω (reduce sweep.n or raise domain.resolution)"
        )
    return lattice


def lattice_cells(lattice: LatticeSpec, grid: VoxelGrid) -> np.ndarray:
    cells = grid.locate(lattice.positions())
    if np.any(cells < 0):
        raise ValueError("lattice node outside the Ω grid")
    return cells


def incident_wave(config: ScenarioConfig, omega: float) -> PlaneWave:
    inc = config.incidence
    return PlaneWave(
        theta=inc.unit_theta(),
        theta_perp=inc.unit_theta_perp(),
        beta1=inc.as_complex(inc.beta1),
        beta2=inc.as_complex(inc.beta2),
        omega=omega,
    )


def resonance_for(config: ScenarioConfig, eig: EigenSystem) -> ResonanceInfo:
    r = config.resonance
    return build_resonance(
        eig, config.inclusion.a, config.inclusion.c1, h=r.h, b=r.b, sign=r.sign, mode=r.mode,
    )


# -----------------------------
# Noise
# -----------------------------
def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def add_noise(
    p: np.ndarray,
    s: np.ndarray,
    directions: np.ndarray,
    delta: float,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    p + delta |p| xi xhat and s + delta |s| (xi1 t1 + xi2 t2) / sqrt(2) per sample,
    xi standard complex Gaussian; the polarisation of each part is preserved.
    """
    dirs = np.asarray(directions, dtype=float).reshape(-1, 3)
    p = np.asarray(p, dtype=complex).reshape(-1, 3)
    s = np.asarray(s, dtype=complex).reshape(-1, 3)
    if delta == 0.0:
        return p.copy(), s.copy()
    m = dirs.shape[0]
    t1, t2 = tangent_frames(dirs)
    xi = _complex_normal(rng, (m, 3))
    p_mag = np.linalg.norm(p, axis=1)
    s_mag = np.linalg.norm(s, axis=1)
    p_new = p + (delta * p_mag * xi[:, 0])[:, None] * dirs
    s_new = s + (delta * s_mag / np.sqrt(2.0))[:, None] * (xi[:, 1][:, None] * t1 + xi[:, 2][:, None] * t2)
    return p_new, s_new


def _split(total: np.ndarray, directions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    p = directions * np.einsum("ki,ki->k", directions, total)[:, None]
    return p, total - p


def _noisy_pair(
    bank_p: np.ndarray,
    bank_s: np.ndarray,
    back: np.ndarray,
    sphere: SphereGrid,
    xb: np.ndarray,
    delta: float,
    rng: np.random.Generator,
) -> Tuple[FarField, np.ndarray]:
    """Noise on the bank first, then on the backscatter sample (fixed draw order)."""
    p, s = add_noise(bank_p, bank_s, sphere.nodes, delta, rng)
    bp, sp = _split(np.asarray(back, dtype=complex).reshape(1, 3), xb[None, :])
    bp, sp = add_noise(bp, sp, xb[None, :], delta, rng)
    return FarField(sphere=sphere, p_values=p, s_values=s), (bp + sp)[0]


# -----------------------------
# Shared background data
# -----------------------------
@dataclass
class _Background:
    solver: BackgroundSolver
    wave: PlaneWave
    V: np.ndarray                  # (N, 3) total background field on Ω cells
    data_sphere: SphereGrid
    xb: np.ndarray
    bank_p: np.ndarray
    bank_s: np.ndarray
    back: np.ndarray
    anchors: np.ndarray
    Vs_anchors: np.ndarray         # (A, 3)
    green_cols: np.ndarray         # (A, 3, N, 3): G(cell, x_a) e_k
    recip: Optional[np.ndarray]    # (M + 1, 3, L, 3) surrogate bank over data nodes and xb


def _check_anchor(bs: BackgroundSolver, medium: ElasticMedium, x: np.ndarray) -> None:
    inside = bool(bs.host_of(x[None, :])[0] >= 0)
    if medium.domain is not None:
        inside = inside or bool(medium.domain.contains(x[None, :])[0])
    if inside:
        raise SourceInsideDomainError(f"anchor {x.tolist()} lies inside Ω")


def _background(
    config: ScenarioConfig,
    medium: ElasticMedium,
    res: ResonanceInfo,
    cells: np.ndarray,
) -> _Background:
    omega = res.omega
    bs = BackgroundSolver(medium, omega)
    wave = incident_wave(config, omega)
    V = bs.solve_wave(wave).values
    sph = config.sphere
    data_sphere = sphere_grid(sph.rule, sph.n_theta, sph.n_points).mirrored()
    xb = backscatter_direction(wave)

    bank_p, bank_s = bs.far_field_at(data_sphere.nodes, V)
    bp, sp = bs.far_field_at(xb[None, :], V)
    back = (bp + sp)[0]

    anchors = np.asarray(config.surface.anchors, dtype=float).reshape(-1, 3)
    cols = []
    for x in anchors:
        _check_anchor(bs, medium, x)
        cols.append(bs.green_fields(x, np.eye(3)))
    Vs_anchors = bs.scattered_at(anchors, V)

    recip = None
    if config.source == DataSource.SURROGATE:
        dirs = np.vstack([data_sphere.nodes, xb[None, :]])
        recip = bs.reciprocal_bank(dirs, cells=cells)
    logger.info(
        "background data ready: %d data directions, %d anchors, |V^inf(-theta)|=%.4g",
        data_sphere.size, anchors.shape[0], float(np.linalg.norm(back)),
    )
    return _Background(
        solver=bs, wave=wave, V=V, data_sphere=data_sphere, xb=xb,
        bank_p=bank_p, bank_s=bank_s, back=back, anchors=anchors,
        Vs_anchors=Vs_anchors, green_cols=np.stack(cols), recip=recip,
    )


# -----------------------------
# Per-node data
# -----------------------------
def _surrogate_node(bg: _Background, res: ResonanceInfo, medium: ElasticMedium, j: int, cell: int):
    C = dominant_factor(res)
    p = res.E_B @ bg.V[cell]
    dirs = np.vstack([bg.data_sphere.nodes, bg.xb[None, :]])
    gp, gs = green_farfield_moment(bg.recip[:, :, j, :], dirs, p, medium)
    dp = C * gp
    ds = C * gs
    bank_p = bg.bank_p + dp[:-1]
    bank_s = bg.bank_s + ds[:-1]
    back = bg.back + dp[-1] + ds[-1]
    return bank_p, bank_s, back


def _full_node(bg: _Background, medium: ElasticMedium, inclusion: Inclusion):
    sol = solve_with_inclusion(medium, bg.wave, None, inclusion, solver=bg.solver)
    dirs = np.vstack([bg.data_sphere.nodes, bg.xb[None, :]])
    p, s = inclusion_far_field_at(bg.solver, sol, dirs)
    diff = inclusion_scattered_at(bg.solver, sol, bg.anchors) - bg.Vs_anchors
    return p[:-1], s[:-1], p[-1] + s[-1], diff


def generate_measurements(
    config: ScenarioConfig,
    medium: ElasticMedium,
    eig: EigenSystem,
    resonance: Optional[ResonanceInfo] = None,
    threads: int = 1,
) -> InjectionSweep:
    """Before/after injection data over the lattice; per-node failures are recorded, never raised."""
    if medium.grid is None:
        raise ValueError("measurement generation needs a medium sampled on the Ω grid")
    res = resonance if resonance is not None else resonance_for(config, eig)
    lattice = build_lattice(config, medium.grid)
    cells = lattice_cells(lattice, medium.grid)
    positions = lattice.positions()
    bg = _background(config, medium, res, cells)
    C = dominant_factor(res)

    noise = config.noise
    children = np.random.SeedSequence(noise.seed).spawn(lattice.size + 1)
    bank_V, back_V = _noisy_pair(
        bg.bank_p, bg.bank_s, bg.back, bg.data_sphere, bg.xb, noise.delta, np.random.default_rng(children[0])
    )

    def one(j: int) -> NodeMeasurement:
        cell = int(cells[j])
        z = positions[j]
        rho_true = float(medium.rho_field[cell])
        planted_green = np.einsum("akj,j->ak", bg.green_cols[:, :, cell, :], res.moment)
        try:
            inclusion = Inclusion(z=z, a=config.inclusion.a, c1=config.inclusion.c1, gridB=eig.grid)
            inclusion.check_inside(medium)
            if config.source == DataSource.SURROGATE:
                bank_p, bank_s, back = _surrogate_node(bg, res, medium, j, cell)
                diff = C * np.einsum("akj,j->ak", bg.green_cols[:, :, cell, :], res.E_B @ bg.V[cell])
            else:
                bank_p, bank_s, back, diff = _full_node(bg, medium, inclusion)
            bank_U, back_U = _noisy_pair(
                bank_p, bank_s, back, bg.data_sphere, bg.xb, noise.delta1,
                np.random.default_rng(children[j + 1]),
            )
        except _NODE_ERRORS as e:
            logger.warning("node %d at %s failed: %s", j, z.tolist(), e)
            return NodeMeasurement(
                index=j, z=z, rho_true=rho_true, planted_green=planted_green,
                error=f"{type(e).__name__}: {e}",
            )
        logger.debug("node %d at %s: |U - V|(-theta) = %.4g", j, z.tolist(), float(np.linalg.norm(back - bg.back)))
        return NodeMeasurement(
            index=j, z=z, rho_true=rho_true, back_U=back_U, bank_U=bank_U,
            planted_diff=diff, planted_green=planted_green,
        )

    workers = max(1, int(threads))
    if workers == 1:
        nodes = [one(j) for j in range(lattice.size)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            nodes = list(pool.map(one, range(lattice.size)))
    failed = sum(1 for n in nodes if n.failed)
    logger.info(
        "measurements (%s): %d nodes, %d failed, delta=%g delta1=%g seed=%d",
        config.source.value, len(nodes), failed, noise.delta, noise.delta1, noise.seed,
    )
    return InjectionSweep(
        lattice=lattice,
        wave=bg.wave,
        back_direction=bg.xb,
        back_V=back_V,
        bank_V=bank_V,
        anchors=bg.anchors,
        resonance=res,
        source=config.source,
        delta=noise.delta,
        delta1=noise.delta1,
        seed=noise.seed,
        nodes=nodes,
    )
