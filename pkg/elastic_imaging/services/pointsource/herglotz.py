"""
Point-source method.

A point source Gamma(., x) q outside K is approximated on ∂K by a Herglotz
wave Hg (plane waves over the sphere weighted by g = (g_p, g_s)). Contracting
measured far fields against g then yields q . u^s(x) by mixed reciprocity.

Discretisation: the least-squares problem is posed with the square roots of
the ∂K and sphere weights folded into the matrix, so the unknown
h = sqrt(w_d) g has the sphere L2 norm of g and one SVD serves every alpha
and every right-hand side.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from elastic_imaging.domain.config import TikhonovConfig
from elastic_imaging.domain.errors import DirectionMismatchError
from elastic_imaging.domain.farfield import FarField, SphereGrid
from elastic_imaging.domain.herglotz import ExteriorFields, HerglotzKernel, KernelFit, MeasurementSurfaceK
from elastic_imaging.domain.medium import ElasticMedium, PlaneWave
from elastic_imaging.services.kernels.elastic import kupradze_tensor, plane_wave_field, wavenumbers

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class AlphaPolicy:
    alphas: Tuple[float, ...] = tuple(10.0 ** -k for k in range(1, 10))
    noise_floor: float = 1e-4
    collision_ceiling: float = 0.2

    @classmethod
    def from_config(cls, cfg: TikhonovConfig) -> "AlphaPolicy":
        return cls(alphas=tuple(cfg.alphas()), noise_floor=cfg.noise_floor, collision_ceiling=cfg.collision_ceiling)


def _surface_sphere(surface: MeasurementSurfaceK) -> SphereGrid:
    dirs = (surface.nodes - surface.center[None, :]) / surface.radius
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return SphereGrid(nodes=dirs, weights=surface.weights / surface.radius ** 2)


def herglotz_apply(kernel: HerglotzKernel, points, medium: ElasticMedium, omega: float) -> np.ndarray:
    """(Hg)(y) by sphere quadrature, (P, 3)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    kn = wavenumbers(medium, omega)
    gp, gs = kernel.vector_kernels()
    proj = pts @ kernel.sphere.nodes.T
    w = kernel.sphere.weights[None, :]
    return (np.exp(1j * kn.kappa_p * proj) * w) @ gp + (np.exp(1j * kn.kappa_s * proj) * w) @ gs


class HerglotzSystem:
    """Weighted Herglotz matrix from the sphere to ∂K with its SVD."""

    def __init__(self, surface: MeasurementSurfaceK, sphere: SphereGrid, omega: float, medium: ElasticMedium):
        self.surface = surface
        self.sphere = sphere
        self.omega = omega
        self.medium = medium

        kn = wavenumbers(medium, omega)
        d = sphere.nodes
        t1, t2 = sphere.tangents()
        self.perp = np.stack([t1, t2], axis=1)
        proj = surface.nodes @ d.T                                   # (K, M)
        ep = np.exp(1j * kn.kappa_p * proj)
        es = np.exp(1j * kn.kappa_s * proj)
        n_k, n_d = proj.shape
        H = np.empty((n_k, 3, n_d, 3), dtype=complex)
        H[:, :, :, 0] = ep[:, None, :] * d.T[None, :, :]
        H[:, :, :, 1] = es[:, None, :] * t1.T[None, :, :]
        H[:, :, :, 2] = es[:, None, :] * t2.T[None, :, :]
        self._sw = np.sqrt(surface.weights)
        self._dw = np.sqrt(sphere.weights)
        H *= self._sw[:, None, None, None]
        H *= self._dw[None, None, :, None]
        self.matrix = H.reshape(3 * n_k, 3 * n_d)
        self.U, self.s, self.Vh = scipy.linalg.svd(self.matrix, full_matrices=False)
        logger.info(
            "Herglotz system: %d surface nodes, %d directions, sigma in [%.3e, %.3e]",
            n_k, n_d, self.s[-1], self.s[0],
        )

    # -----------------------------
    # Right-hand sides
    # -----------------------------
    def check_exterior(self, x) -> np.ndarray:
        xv = np.asarray(x, dtype=float).reshape(3)
        if bool(self.surface.contains(xv)[0]) or np.isclose(
            np.linalg.norm(xv - self.surface.center), self.surface.radius
        ):
            raise ValueError(f"point {xv.tolist()} must lie strictly outside K")
        return xv

    def point_source_rhs(self, x, polarizations) -> np.ndarray:
        """Weighted samples of Gamma(y_m, x) q on ∂K, one column per polarization."""
        xv = self.check_exterior(x)
        pol = np.asarray(polarizations, dtype=complex).reshape(-1, 3)
        G = kupradze_tensor(self.surface.nodes - xv[None, :], self.omega, self.medium)   # (K, 3, 3)
        b = np.einsum("mij,kj->mik", G, pol)                                            # (K, 3, k)
        b *= self._sw[:, None, None]
        return b.reshape(-1, pol.shape[0])

    # -----------------------------
    # Tikhonov
    # -----------------------------
    def solve(self, b: np.ndarray, alpha: float) -> Tuple[np.ndarray, float, float]:
        """(h, relative discrepancy, ||g||) for one weighted right-hand side."""
        if not alpha > 0:
            raise ValueError("alpha must be > 0")
        bn = float(np.linalg.norm(b))
        proj = self.U.conj().T @ b
        s2 = self.s ** 2
        h = self.Vh.conj().T @ (self.s / (s2 + alpha) * proj)
        outside = max(bn ** 2 - float(np.sum(np.abs(proj) ** 2)), 0.0)
        inside = float(np.sum(np.abs(alpha / (s2 + alpha) * proj) ** 2))
        disc = np.sqrt(outside + inside) / bn if bn > 0 else 0.0
        norm = float(np.sqrt(np.sum(np.abs(self.s / (s2 + alpha) * proj) ** 2)))
        return h, float(disc), norm

    def kernel_from(self, h: np.ndarray) -> HerglotzKernel:
        g = h.reshape(-1, 3) / self._dw[:, None]
        return HerglotzKernel(sphere=self.sphere, gp_values=g[:, 0], gs_values=g[:, 1:], perp_field=self.perp)

    def sweep(self, b: np.ndarray, alphas: Sequence[float]) -> List[Tuple[float, float, float]]:
        out = []
        for alpha in alphas:
            _, disc, norm = self.solve(b, alpha)
            out.append((float(alpha), disc, norm))
        return out

    def fit(self, b: np.ndarray, policy: AlphaPolicy) -> KernelFit:
        """
        Morozov-style choice over the sweep: the smallest alpha whose relative
        discrepancy is still at least the noise floor (largest alpha if none is).
        """
        record = self.sweep(b, policy.alphas)
        chosen = record[0]
        for entry in record:
            if entry[1] >= policy.noise_floor:
                chosen = entry
        alpha = chosen[0]
        h, disc, norm = self.solve(b, alpha)
        floor = min(e[1] for e in record)
        collision = floor > policy.collision_ceiling
        if collision:
            logger.warning(
                "Tikhonov floor %.3g stays above %.3g; omega^2 rho_tilde may be an interior eigenvalue of K",
                floor, policy.collision_ceiling,
            )
        return KernelFit(
            kernel=self.kernel_from(h),
            alpha=alpha,
            discrepancy=disc,
            kernel_norm=norm,
            collision_warning=collision,
            sweep=record,
        )

    def fit_point_source(self, x, policy: AlphaPolicy, polarizations=None) -> List[KernelFit]:
        """One kernel per polarization (default e1, e2, e3) for the source at x."""
        pol = np.eye(3) if polarizations is None else np.asarray(polarizations)
        B = self.point_source_rhs(x, pol)
        fits = [self.fit(B[:, k], policy) for k in range(B.shape[1])]
        logger.debug(
            "kernels at %s: alpha=%s discrepancy=%s",
            np.asarray(x).tolist(), [f.alpha for f in fits], [round(f.discrepancy, 6) for f in fits],
        )
        return fits


def minimum_norm_kernel(
    surface: MeasurementSurfaceK,
    x,
    polarization,
    omega: float,
    medium: ElasticMedium,
    alpha: float,
    sphere: Optional[SphereGrid] = None,
    system: Optional[HerglotzSystem] = None,
) -> Tuple[HerglotzKernel, float]:
    """Tikhonov kernel for Gamma(., x) p on ∂K and its relative L2(∂K) discrepancy."""
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    hs = system if system is not None else HerglotzSystem(surface, sphere or _surface_sphere(surface), omega, medium)
    b = hs.point_source_rhs(x, [polarization])[:, 0]
    h, disc, _ = hs.solve(b, alpha)
    return hs.kernel_from(h), disc


# -----------------------------
# Back-projection
# -----------------------------
def _check_directions(data: FarField, kernel: HerglotzKernel) -> None:
    if not data.sphere.matches(kernel.sphere.mirrored(), atol=1e-12):
        raise DirectionMismatchError("far-field data must be sampled at -d for every kernel direction d")


def backproject(data: FarField, kernel: HerglotzKernel, medium: ElasticMedium) -> complex:
    """
    sum_d w_d [4 pi (lam + 2 mu) g_p(d) d . u_p(-d) + 4 pi mu sum_k g_s,k(d) t_k(d) . u_s(-d)]
    which approximates q . u^s(x) for the kernel of the source Gamma(., x) q.
    """
    _check_directions(data, kernel)
    d = kernel.sphere.nodes
    w = kernel.sphere.weights
    p_term = kernel.gp_values * np.einsum("ki,ki->k", d, data.p_values)
    k = kernel.perp_field.shape[1]
    s_proj = np.einsum("kji,ki->kj", kernel.perp_field, data.s_values)             # (M, k)
    s_term = np.sum(kernel.gs_values[:, :k] * s_proj, axis=1)
    total = FOUR_PI * medium.p_modulus * p_term + FOUR_PI * medium.mu * s_term
    return complex(np.sum(w * total))


def backproject_vector(data: FarField, kernels: Sequence[HerglotzKernel], medium: ElasticMedium) -> np.ndarray:
    return np.array([backproject(data, k, medium) for k in kernels], dtype=complex)


def noise_amplification_bound(kernel: HerglotzKernel, delta: float, medium: ElasticMedium) -> float:
    """Bound on the back-projection change caused by far-field data error of L2 size delta."""
    scale = FOUR_PI * max(medium.p_modulus, medium.mu)
    return float(scale * (kernel.p_norm() + kernel.s_norm()) * delta)


def recover_exterior_fields(
    V_inf_bank: FarField,
    U_inf_bank: Optional[FarField],
    surface: MeasurementSurfaceK,
    eval_points,
    omega: float,
    medium: ElasticMedium,
    alpha_policy: AlphaPolicy,
    wave: PlaneWave,
    sphere: Optional[SphereGrid] = None,
    system: Optional[HerglotzSystem] = None,
) -> ExteriorFields:
    """
    Scattered and total fields at exterior points from far-field banks observed
    on the mirrored kernel directions, for the single incidence `wave`.
    """
    kernel_sphere = sphere if sphere is not None else V_inf_bank.sphere.mirrored()
    hs = system if system is not None else HerglotzSystem(surface, kernel_sphere, omega, medium)
    pts = np.asarray(eval_points, dtype=float).reshape(-1, 3)
    Vs = np.empty((pts.shape[0], 3), dtype=complex)
    Us = np.empty((pts.shape[0], 3), dtype=complex) if U_inf_bank is not None else None
    fits: List[List[KernelFit]] = []
    for i, x in enumerate(pts):
        f = hs.fit_point_source(x, alpha_policy)
        fits.append(f)
        kernels = [fit.kernel for fit in f]
        Vs[i] = backproject_vector(V_inf_bank, kernels, medium)
        if Us is not None:
            Us[i] = backproject_vector(U_inf_bank, kernels, medium)
    incident = plane_wave_field(wave, pts, medium)
    return ExteriorFields(
        points=pts,
        Vt=Vs + incident,
        Vs=Vs,
        Ut=None if Us is None else Us + incident,
        Us=Us,
        fits=fits,
    )
