"""
Lippmann-Schwinger volume solver on the voxelised domain Ω.

Unknowns are the total field at the cell centres; the system is
(I - omega^2 T diag(alpha)) u = u^i with T the Kupradze volume operator and
alpha = rho_0 - rho_tilde. A point lying inside a cell interacts with that cell
through the cell-averaged kernel, in both directions, which keeps the discrete
Green's tensor reciprocal.
"""
from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict

from elastic_imaging.domain.errors import ResonanceCollisionError, SolverError, SourceInsideDomainError
from elastic_imaging.domain.farfield import FarField, SphereGrid, tangent_frames
from elastic_imaging.domain.grid import ComplexField3, VoxelGrid
from elastic_imaging.domain.inclusion import Inclusion
from elastic_imaging.domain.medium import ElasticMedium, PlaneWave
from elastic_imaging.services.forward.far_field import far_field_from_sources
from elastic_imaging.services.kernels.assembly import flatten_blocks, point_cell_kernel, volume_operator
from elastic_imaging.services.kernels.elastic import kupradze_tensor, plane_wave_field, wavenumbers

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8
SCHUR_COND_MAX = 1e12


def _residual(A: np.ndarray, x: np.ndarray, b: np.ndarray) -> float:
    """Worst relative residual over the columns of x (absolute for zero columns)."""
    X = x if x.ndim == 2 else x[:, None]
    B = b if b.ndim == 2 else b[:, None]
    r = np.linalg.norm(A @ X - B, axis=0)
    nb = np.linalg.norm(B, axis=0)
    rel = np.where(nb > 0, r / np.where(nb > 0, nb, 1.0), r)
    return float(rel.max(initial=0.0))


class BackgroundSolver:
    """
    Factor-once solver for the variable-density background at one frequency.
    Every incident field (plane waves, point sources) reuses the LU factors.
    """

    def __init__(self, medium: ElasticMedium, omega: float, grid: Optional[VoxelGrid] = None):
        if not omega > 0:
            raise ValueError("omega must be > 0")
        self.medium = medium
        self.omega = omega
        self.grid = grid if grid is not None else medium.grid
        if self.grid is None:
            raise ValueError("background solver needs a grid covering Ω")
        if medium.grid is not None:
            if medium.grid.n_cells != self.grid.n_cells:
                raise ValueError("grid does not match the grid the density is sampled on")
            self.alpha = medium.contrast()
        else:
            self.alpha = np.zeros(self.grid.n_cells)

        self.centers = self.grid.centers()
        self.vol = self.grid.cell_volume
        n = self.grid.n_cells
        self.homogeneous = not np.any(self.alpha != 0.0)
        self._alpha3 = np.repeat(self.alpha, 3)
        if self.homogeneous:
            self.T = None
            self.A = np.eye(3 * n, dtype=complex)
            self._lu = None
        else:
            self.T = volume_operator(self.centers, self.vol, omega, medium)
            self.A = np.eye(3 * n, dtype=complex) - omega ** 2 * self.T * self._alpha3[None, :]
            self._lu = scipy.linalg.lu_factor(self.A)
        logger.info("background solver ready: %d cells, omega=%.6g, homogeneous=%s", n, omega, self.homogeneous)

    @property
    def n_cells(self) -> int:
        return self.grid.n_cells

    # -----------------------------
    # Linear solves
    # -----------------------------
    def solve_flat(self, rhs: np.ndarray) -> np.ndarray:
        """Solve A u = rhs for one or several flattened right-hand sides (3N,) or (3N, k)."""
        b = np.asarray(rhs, dtype=complex)
        if self._lu is None:
            return b.copy()
        u = scipy.linalg.lu_solve(self._lu, b)
        worst = _residual(self.A, u, b)
        if worst > RESIDUAL_TOL:
            raise SolverError(f"Lippmann-Schwinger residual {worst:.3e} exceeds {RESIDUAL_TOL:g}", residual=worst)
        return u

    def solve_incident(self, incident: np.ndarray) -> ComplexField3:
        u = self.solve_flat(np.asarray(incident, dtype=complex).reshape(-1))
        return ComplexField3(grid=self.grid, values=u.reshape(-1, 3))

    def solve_wave(self, wave: PlaneWave) -> ComplexField3:
        return self.solve_incident(plane_wave_field(wave, self.centers, self.medium))

    def solve_waves(self, waves) -> np.ndarray:
        """Total fields for several plane waves at once, shape (k, N, 3)."""
        rhs = np.stack([plane_wave_field(w, self.centers, self.medium).reshape(-1) for w in waves], axis=1)
        u = self.solve_flat(rhs)
        return u.T.reshape(len(waves), self.n_cells, 3)

    # -----------------------------
    # Point sources
    # -----------------------------
    def host_of(self, points) -> np.ndarray:
        return self.grid.locate(points)

    def point_kernel(self, points) -> np.ndarray:
        """Gamma between points and the cells, (P, N, 3, 3), cell-averaged for a point's own cell."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return point_cell_kernel(pts, self.centers, self.vol, self.omega, self.medium, host=self.host_of(pts))

    def green_fields(self, source, polarizations) -> np.ndarray:
        """G(., source) p for each polarization p (rows of `polarizations`), shape (k, N, 3)."""
        pol = np.asarray(polarizations, dtype=complex).reshape(-1, 3)
        K = self.point_kernel(source)[0]                      # (N, 3, 3)
        inc = np.einsum("nij,kj->kni", K, pol)                 # (k, N, 3)
        u = self.solve_flat(inc.reshape(pol.shape[0], -1).T)
        if u.ndim == 1:
            u = u[:, None]
        return u.T.reshape(pol.shape[0], self.n_cells, 3)

    def green_field(self, source, polarization) -> ComplexField3:
        return ComplexField3(grid=self.grid, values=self.green_fields(source, [polarization])[0])

    def reciprocal_bank(self, directions, cells=None) -> np.ndarray:
        """
        Total fields of the plane waves mirrored to each observation direction y:
        the p-wave y e^{-i kp y.x} and the s-waves t_k(y) e^{-i ks y.x}.
        Shape (M, 3, L, 3): direction, wave (p, s1, s2), cell, component.
        By reciprocity y . G^inf(y, z) m = (bank[p] . m) / (4 pi (lam + 2 mu)).
        """
        dirs = np.asarray(directions, dtype=float).reshape(-1, 3)
        t1, t2 = tangent_frames(dirs)
        kn = wavenumbers(self.medium, self.omega)
        proj = self.centers @ dirs.T                                   # (N, M)
        ep = np.exp(-1j * kn.kappa_p * proj)
        es = np.exp(-1j * kn.kappa_s * proj)
        rhs = np.empty((self.n_cells, 3, dirs.shape[0], 3), dtype=complex)
        rhs[:, :, :, 0] = ep[:, None, :] * dirs.T[None, :, :]
        rhs[:, :, :, 1] = es[:, None, :] * t1.T[None, :, :]
        rhs[:, :, :, 2] = es[:, None, :] * t2.T[None, :, :]
        u = self.solve_flat(rhs.reshape(3 * self.n_cells, -1))
        u = u.reshape(self.n_cells, 3, dirs.shape[0], 3).transpose(2, 3, 0, 1)
        if cells is not None:
            u = u[:, :, np.asarray(cells, dtype=np.int64), :]
        return u

    # -----------------------------
    # Evaluation outside the unknown set
    # -----------------------------
    def contrast_sources(self, values: np.ndarray) -> np.ndarray:
        """omega^2 alpha vol u per cell."""
        return self.omega ** 2 * self.vol * self.alpha[:, None] * np.asarray(values).reshape(-1, 3)

    def scattered_at(self, points, values: np.ndarray) -> np.ndarray:
        """Scattered part sum_zeta omega^2 Gamma(x, zeta) alpha vol u_zeta at arbitrary points, (P, 3)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if self.homogeneous:
            return np.zeros((pts.shape[0], 3), dtype=complex)
        q = self.contrast_sources(values)
        K = self.point_kernel(pts)
        return np.einsum("pnij,nj->pi", K, q)

    def far_field_at(self, directions, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return far_field_from_sources(directions, self.centers, self.contrast_sources(values), self.omega, self.medium)

    def far_field(self, values: np.ndarray, sphere: SphereGrid) -> FarField:
        p, s = self.far_field_at(sphere.nodes, values)
        return FarField(sphere=sphere, p_values=p, s_values=s)


# -----------------------------
# Public operations
# -----------------------------
def solve_background(medium: ElasticMedium, wave: PlaneWave, grid_Omega: Optional[VoxelGrid] = None) -> ComplexField3:
    return BackgroundSolver(medium, wave.omega, grid_Omega).solve_wave(wave)


def background_green(
    medium: ElasticMedium,
    grid_Omega: Optional[VoxelGrid],
    source_x,
    polarization,
    omega: float,
    solver: Optional[BackgroundSolver] = None,
) -> ComplexField3:
    """Column G(., source_x) p on the Ω cells; the source must lie outside Ω."""
    bs = solver if solver is not None else BackgroundSolver(medium, omega, grid_Omega)
    x = np.asarray(source_x, dtype=float).reshape(1, 3)
    inside = bs.host_of(x)[0] >= 0
    if medium.domain is not None:
        inside = inside or bool(medium.domain.contains(x)[0])
    if inside:
        raise SourceInsideDomainError(f"point source {x[0].tolist()} lies inside Ω")
    return bs.green_field(x[0], polarization)


class InclusionSolution(BaseModel):
    """Total field with the inclusion injected, on the Ω cells and on the D cells."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    omega_field: ComplexField3
    d_field: ComplexField3
    alpha_omega: np.ndarray
    alpha_d: np.ndarray
    residual: float
    omega: float

    def d_sources(self) -> np.ndarray:
        g = self.d_field.grid
        return self.omega ** 2 * g.cell_volume * self.alpha_d[:, None] * self.d_field.values

    def omega_sources(self) -> np.ndarray:
        g = self.omega_field.grid
        return self.omega ** 2 * g.cell_volume * self.alpha_omega[:, None] * self.omega_field.values


def solve_with_inclusion(
    medium: ElasticMedium,
    wave: PlaneWave,
    grid_Omega: Optional[VoxelGrid],
    inclusion: Inclusion,
    solver: Optional[BackgroundSolver] = None,
) -> InclusionSolution:
    """
    One block system over the Ω cells and the finer D cells. D carries the
    extra contrast rho1 - rho0(host cell) on top of the background contrast,
    so the total contrast on D is rho1 - rho_tilde. The Ω block reuses the
    background LU through a Schur complement on the D unknowns.
    """
    bs = solver if solver is not None else BackgroundSolver(medium, wave.omega, grid_Omega)
    if bs.omega != wave.omega:
        raise ValueError("solver frequency differs from the incident wave frequency")
    inclusion.check_inside(medium)
    omega = wave.omega
    w2 = omega ** 2

    dgrid = inclusion.grid_D()
    dpts = dgrid.centers()
    vol_d = dgrid.cell_volume
    host = bs.host_of(dpts)
    rho_host = np.where(
        host >= 0,
        (bs.alpha[np.clip(host, 0, None)] + medium.rho_tilde),
        medium.rho_tilde,
    )
    alpha_d = inclusion.rho1 - rho_host
    alpha_d3 = np.repeat(alpha_d, 3)
    m = dgrid.n_cells

    T_dd = volume_operator(dpts, vol_d, omega, medium)
    A_dd = np.eye(3 * m, dtype=complex) - w2 * T_dd * alpha_d3[None, :]
    G_dO = flatten_blocks(point_cell_kernel(dpts, bs.centers, bs.vol, omega, medium, host=host))
    A_dO = -w2 * G_dO * (bs._alpha3 * bs.vol)[None, :]
    A_Od = -w2 * G_dO.T * (alpha_d3 * vol_d)[None, :]

    P_O = plane_wave_field(wave, bs.centers, medium).reshape(-1)
    P_d = plane_wave_field(wave, dpts, medium).reshape(-1)

    y = bs.solve_flat(P_O)
    X = bs.solve_flat(A_Od)
    S = A_dd - A_dO @ X
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > SCHUR_COND_MAX:
        raise ResonanceCollisionError(
            f"inclusion system is near-singular (cond {cond:.3e}); the frequency sits on a resonance, increase the detuning b"
        )
    u_d = scipy.linalg.solve(S, P_d - A_dO @ y)
    u_O = y - X @ u_d

    r_O = bs.A @ u_O + A_Od @ u_d - P_O
    r_d = A_dO @ u_O + A_dd @ u_d - P_d
    residual = float(np.sqrt(np.linalg.norm(r_O) ** 2 + np.linalg.norm(r_d) ** 2)
                     / np.sqrt(np.linalg.norm(P_O) ** 2 + np.linalg.norm(P_d) ** 2))
    if residual > RESIDUAL_TOL:
        raise SolverError(f"inclusion solve residual {residual:.3e} exceeds {RESIDUAL_TOL:g}", residual=residual)
    logger.debug("inclusion at %s solved: %d D cells, cond(S)=%.3e", inclusion.z.tolist(), m, cond)

    return InclusionSolution(
        omega_field=ComplexField3(grid=bs.grid, values=u_O.reshape(-1, 3)),
        d_field=ComplexField3(grid=dgrid, values=u_d.reshape(-1, 3)),
        alpha_omega=bs.alpha,
        alpha_d=alpha_d,
        residual=residual,
        omega=omega,
    )


def inclusion_scattered_at(bs: BackgroundSolver, solution: InclusionSolution, points) -> np.ndarray:
    """U^s at exterior points (outside Ω)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    out = bs.scattered_at(pts, solution.omega_field.values)
    dpts = solution.d_field.grid.centers()
    K = kupradze_tensor(pts[:, None, :] - dpts[None, :, :], solution.omega, bs.medium)
    return out + np.einsum("pnij,nj->pi", K, solution.d_sources())


def inclusion_far_field_at(bs: BackgroundSolver, solution: InclusionSolution, directions) -> Tuple[np.ndarray, np.ndarray]:
    p1, s1 = far_field_from_sources(directions, bs.centers, solution.omega_sources(), solution.omega, bs.medium)
    p2, s2 = far_field_from_sources(
        directions, solution.d_field.grid.centers(), solution.d_sources(), solution.omega, bs.medium
    )
    return p1 + p2, s1 + s2


def inclusion_far_field(bs: BackgroundSolver, solution: InclusionSolution, sphere: SphereGrid) -> FarField:
    p, s = inclusion_far_field_at(bs, solution, sphere.nodes)
    return FarField(sphere=sphere, p_values=p, s_values=s)
