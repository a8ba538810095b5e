from __future__ import annotations

import logging
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from elastic_imaging.domain.errors import NonSymmetricMatrixError, NoRadiatingModeError, ResonanceCollisionError
from elastic_imaging.domain.grid import VoxelGrid
from elastic_imaging.domain.medium import ElasticMedium
from elastic_imaging.domain.spectrum import EigenSystem, ResonanceInfo, ScalingReport
from elastic_imaging.services.kernels.assembly import volume_operator

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10
MOMENT_TOL = 1e-10
EIGEN_FLOOR = 1e-10
DEGENERACY_RTOL = 1e-6


def assemble_newtonian(grid: VoxelGrid, medium: ElasticMedium) -> np.ndarray:
    """Midpoint-rule Newtonian operator with the Kelvin kernel, (3N, 3N) real symmetric."""
    return volume_operator(grid.centers(), grid.cell_volume, 0.0, medium)


def _fix_sign(e: np.ndarray, m: np.ndarray) -> float:
    if np.linalg.norm(m) >= MOMENT_TOL:
        k = int(np.argmax(np.abs(m)))
        return -1.0 if m[k] < 0 else 1.0
    first = e[0]
    k = int(np.argmax(np.abs(first)))
    if first[k] != 0.0:
        return -1.0 if first[k] < 0 else 1.0
    flat = e.reshape(-1)
    nz = np.flatnonzero(flat)
    if nz.size and flat[nz[0]] < 0:
        return -1.0
    return 1.0


def eigensystem(matrix: np.ndarray, grid: VoxelGrid) -> EigenSystem:
    M = np.asarray(matrix, dtype=float)
    scale = float(np.max(np.abs(M)))
    asym = float(np.max(np.abs(M - M.T)))
    if asym > SYMMETRY_TOL * max(scale, 1e-300):
        raise NonSymmetricMatrixError(f"matrix is not symmetric (max |M - M^T| = {asym:.3e})")

    w, V = scipy.linalg.eigh(0.5 * (M + M.T))
    order = np.argsort(-np.abs(w), kind="stable")
    w = w[order]
    vol = grid.cell_volume
    funcs = V[:, order].T.reshape(len(w), grid.n_cells, 3) / np.sqrt(vol)
    moments = funcs.sum(axis=1) * vol
    signs = np.array([_fix_sign(funcs[n], moments[n]) for n in range(len(w))])
    funcs *= signs[:, None, None]
    moments *= signs[:, None]
    logger.info("eigensystem: %d modes, top eigenvalue %.6g", len(w), w[0])
    return EigenSystem(grid=grid, eigenvalues=w, eigenfunctions=funcs, moments=moments)


def newtonian_eigensystem(grid: VoxelGrid, medium: ElasticMedium) -> EigenSystem:
    return eigensystem(assemble_newtonian(grid, medium), grid)


def degenerate_cluster(eig: EigenSystem, n: int, rtol: float = DEGENERACY_RTOL) -> List[int]:
    lam = eig.eigenvalues
    return [int(j) for j in np.flatnonzero(np.abs(lam - lam[n]) <= rtol * abs(lam[n]))]


def verify_scaling(gridB: VoxelGrid, a: float, medium: ElasticMedium, n_modes: int = 5) -> ScalingReport:
    """Eigenvalue and moment ratios between aB and B for the top n_modes modes."""
    if not 0.0 < a <= 1.0:
        raise ValueError("scale a must lie in (0, 1]")
    eB = newtonian_eigensystem(gridB, medium)
    eD = newtonian_eigensystem(gridB.scaled(a), medium)
    k = min(n_modes, eB.size)
    eigen_ratios = eD.eigenvalues[:k] / eB.eigenvalues[:k]

    clusters: List[List[int]] = []
    moment_ratios = np.empty(k)
    for n in range(k):
        cl = degenerate_cluster(eB, n)
        clusters.append(cl)
        # cluster norms do not depend on the basis chosen inside a degenerate eigenspace
        num = float(np.sqrt(np.sum(eD.moments[cl] ** 2)))
        den = float(np.sqrt(np.sum(eB.moments[cl] ** 2)))
        moment_ratios[n] = num / den if den >= MOMENT_TOL else np.nan
    return ScalingReport(a=a, eigen_ratios=eigen_ratios, moment_ratios=moment_ratios, clusters=clusters)


def select_resonant_mode(eig: EigenSystem) -> int:
    """Mode with the largest |moment| (ties: larger eigenvalue, then lower index)."""
    norms = eig.moment_norms()
    cand = (eig.eigenvalues > EIGEN_FLOOR) & (norms >= MOMENT_TOL)
    if not np.any(cand):
        raise NoRadiatingModeError("no mode with nonzero volume mean; the resonant leading term vanishes")
    best = norms[cand].max()
    ties = np.flatnonzero(cand & (norms >= best * (1.0 - 1e-9)))
    return int(sorted(ties, key=lambda j: (-eig.eigenvalues[j], j))[0])


def resonance_frequency(lambda_n0_B: float, c1: float) -> float:
    if lambda_n0_B <= 0 or c1 <= 0:
        raise ValueError("lambda_n0_B and c1 must be positive")
    return float(1.0 / np.sqrt(c1 * lambda_n0_B))


def incident_frequency(res: ResonanceInfo, a: float, b: float, sign: int) -> float:
    """omega with omega^2 = omega_n0^2 + sign * b * a^h."""
    if not 0.0 < res.h < 1.0 or b < 0:
        raise ValueError("need 0 < h < 1 and b >= 0")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    w2 = res.omega_n0 ** 2 + sign * b * a ** res.h
    if w2 <= 0:
        raise ValueError(f"detuning gives omega^2 = {w2:.4g} <= 0; reduce b or flip the sign")
    return float(np.sqrt(w2))


def build_resonance(
    eig: EigenSystem,
    a: float,
    c1: float,
    h: float = 0.5,
    b: float = 1.0,
    sign: int = 1,
    mode: Optional[int] = None,
) -> ResonanceInfo:
    n0 = select_resonant_mode(eig) if mode is None else int(mode)
    if not 0 <= n0 < eig.size:
        raise ValueError(f"mode index {n0} out of range")
    lam_B = float(eig.eigenvalues[n0])
    m = eig.moments[n0]
    cluster = degenerate_cluster(eig, n0)
    degenerate = len(cluster) > 1
    # projector onto the resonant eigenspace; basis independent
    E_B = np.einsum("ki,kj->ij", eig.moments[cluster], eig.moments[cluster])
    if degenerate:
        logger.warning(
            "resonant eigenvalue %.6g is %d-fold degenerate; E_B has rank %d",
            lam_B, len(cluster), int(np.linalg.matrix_rank(E_B, tol=MOMENT_TOL)),
        )
    res = ResonanceInfo(
        n0=n0,
        lambda_n0_B=lam_B,
        omega_n0=resonance_frequency(lam_B, c1),
        moment=m,
        E_B=E_B,
        a=a, c1=c1, h=h, b=b, sign=sign,
        degenerate=degenerate,
        cluster=cluster,
    )
    omega = incident_frequency(res, a, b, sign)
    logger.info("resonance n0=%d lambda_B=%.6g omega_n0=%.6g omega=%.6g", n0, lam_B, res.omega_n0, omega)
    return res.model_copy(update={"omega_inc": omega})


def resolvent_moment(matrix: np.ndarray, grid: VoxelGrid, rho1: float, rho0_z: float, omega: float) -> np.ndarray:
    """Columns are the volume integrals of (I - (rho1 - rho0_z) omega^2 N)^{-1} e_j."""
    c = (rho1 - rho0_z) * omega ** 2
    vol = grid.cell_volume
    n = grid.n_cells
    if c == 0.0:
        return grid.total_volume * np.eye(3)

    ev = scipy.linalg.eigvalsh(matrix)
    norm = float(np.max(np.abs(ev)))
    k = int(np.argmin(np.abs(1.0 / c - ev)))
    if abs(1.0 / c - ev[k]) <= 1e-10 * norm:
        raise ResonanceCollisionError(
            f"1/((rho1 - rho0) omega^2) = {1.0 / c:.6g} hits eigenvalue {ev[k]:.6g}",
            eigenvalue=float(ev[k]),
        )
    system = np.eye(3 * n) - c * matrix
    rhs = np.tile(np.eye(3), (n, 1))
    W = scipy.linalg.solve(system, rhs)
    return W.reshape(n, 3, 3).sum(axis=0) * vol


def resolvent_moment_spectral(eig: EigenSystem, rho1: float, rho0_z: float, omega: float) -> np.ndarray:
    c = (rho1 - rho0_z) * omega ** 2
    weights = 1.0 / (1.0 - c * eig.eigenvalues)
    return np.einsum("n,ni,nj->ij", weights, eig.moments, eig.moments)


def sigma_gap(
    eig: EigenSystem,
    n0: int,
    rho1: float,
    rho0_z: float,
    omega: float,
    a: float = 1.0,
    exclude: Optional[List[int]] = None,
) -> Tuple[float, float]:
    """
    (|1 - c lambda_n0|, min over the other modes of |1 - c lambda_n|) with
    c = (rho1 - rho0) omega^2 and lambda_n = a^2 times the eigenvalues of `eig`
    (pass the B system with the inclusion scale, or the D system with a = 1).
    Indices in `exclude` (e.g. the degenerate partners of n0) are skipped.
    """
    c = (rho1 - rho0_z) * omega ** 2
    gaps = np.abs(1.0 - c * a ** 2 * eig.eigenvalues)
    skip = sorted(set([n0] + list(exclude or [])))
    others = np.delete(gaps, skip)
    return float(gaps[n0]), float(others.min()) if others.size else float("inf")


def volume_mean(values: np.ndarray, grid: VoxelGrid) -> np.ndarray:
    return np.asarray(values).reshape(grid.n_cells, 3).sum(axis=0) * grid.cell_volume
