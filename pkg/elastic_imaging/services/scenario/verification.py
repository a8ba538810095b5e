"""Invariant suite run by `elastic-imaging verify`."""
from __future__ import annotations

import logging
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from elastic_imaging.domain.config import ScenarioConfig
from elastic_imaging.domain.herglotz import MeasurementSurfaceK
from elastic_imaging.domain.inclusion import Inclusion
from elastic_imaging.domain.medium import ElasticMedium, PlaneWave
from elastic_imaging.services.forward.asymptotics import asymptotic_scattered
from elastic_imaging.services.forward.far_field import far_field_from_sources, gauss_sphere
from elastic_imaging.services.forward.lippmann_schwinger import (
    BackgroundSolver,
    inclusion_scattered_at,
    solve_with_inclusion,
)
from elastic_imaging.services.inversion.steps import elastic_laplacian_fd
from elastic_imaging.services.kernels.elastic import (
    kelvin_matrix,
    kelvin_tensor,
    kupradze_matrix,
    kupradze_series,
    kupradze_tensor,
    plane_wave_field,
    wavenumbers,
)
from elastic_imaging.services.pointsource.herglotz import HerglotzSystem
from elastic_imaging.services.scenario.phantom import build_phantom
from elastic_imaging.services.spectrum.newtonian import (
    build_resonance,
    newtonian_eigensystem,
    resonance_frequency,
    select_resonant_mode,
    verify_scaling,
)
from elastic_imaging.services.spectrum.shapes import ball_grid, reference_ball, reference_shape

logger = logging.getLogger(__name__)


class CheckResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""


def _medium(config: ScenarioConfig) -> ElasticMedium:
    m = config.medium
    return ElasticMedium(lam=m.lam, mu=m.mu, rho_tilde=m.rho_tilde)


def _rel(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)


def loglog_slope(h, err) -> float:
    return float(np.polyfit(np.log(np.asarray(h, dtype=float)), np.log(np.asarray(err, dtype=float)), 1)[0])


# -----------------------------
# Kernels
# -----------------------------
def check_series_agreement(config: ScenarioConfig, omega: float = 1.0, tol: float = 1e-8) -> CheckResult:
    medium = _medium(config)
    ks = wavenumbers(medium, omega).kappa_s
    rng = np.random.default_rng(0)
    worst = 0.0
    for kr in (0.02, 0.1, 0.3, 0.5):
        d = rng.standard_normal(3)
        d *= (kr / ks) / np.linalg.norm(d)
        worst = max(worst, _rel(kupradze_matrix(d, np.zeros(3), omega, medium),
                                kupradze_series(d, np.zeros(3), omega, medium, n_terms=30)))
    return CheckResult(name="kupradze closed form vs series", passed=worst <= tol, value=worst, threshold=tol)


def check_kelvin_limit(config: ScenarioConfig, min_slope: float = 0.9) -> CheckResult:
    medium = _medium(config)
    r = np.array([0.3, -0.2, 0.4])
    omegas = np.array([1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
    err = [np.linalg.norm(kupradze_tensor(r, w, medium) - kelvin_tensor(r, medium)) for w in omegas]
    slope = loglog_slope(omegas, err)
    return CheckResult(name="kupradze -> kelvin as omega -> 0", passed=slope >= min_slope, value=slope, threshold=min_slope)


def check_kelvin_symmetry(config: ScenarioConfig, tol: float = 1e-12) -> CheckResult:
    medium = _medium(config)
    rng = np.random.default_rng(1)
    x = rng.standard_normal((8, 3))
    y = rng.standard_normal((8, 3))
    G = kelvin_matrix(x, y, medium)
    sym = _rel(G, np.swapaxes(G, -1, -2))
    swap = _rel(G, kelvin_matrix(y, x, medium))
    homog = _rel(kelvin_tensor(2.5 * (x - y), medium) * 2.5, G)
    worst = max(sym, swap, homog)
    return CheckResult(
        name="kelvin symmetry and homogeneity", passed=worst <= tol, value=worst, threshold=tol,
        detail=f"transpose {sym:.1e}, swap {swap:.1e}, degree -1 {homog:.1e}",
    )


# -----------------------------
# Spectrum
# -----------------------------
def check_eigen_scaling(config: ScenarioConfig, tol: float = 0.01) -> CheckResult:
    shape = config.reference_shape
    gridB = reference_shape(shape.kind, shape.resolution, shape.axes)
    worst = 0.0
    for a in (0.5, 0.25):
        report = verify_scaling(gridB, a, _medium(config), n_modes=5)
        worst = max(worst, report.max_eigen_deviation(), report.max_moment_deviation())
    return CheckResult(name="eigenvalue a^2 and moment a^1.5 scaling", passed=worst <= tol, value=worst, threshold=tol)


def check_resonance_invariance(config: ScenarioConfig, tol: float = 1e-10) -> CheckResult:
    shape = config.reference_shape
    medium = _medium(config)
    gridB = reference_shape(shape.kind, shape.resolution, shape.axes)
    eB = newtonian_eigensystem(gridB, medium)
    n0 = select_resonant_mode(eB)
    c1 = config.inclusion.c1
    ref = resonance_frequency(float(eB.eigenvalues[n0]), c1)
    worst = 0.0
    for a in (0.1, 0.05):
        eD = newtonian_eigensystem(gridB.scaled(a), medium)
        omega = 1.0 / np.sqrt(c1 / a ** 2 * float(eD.eigenvalues[n0]))
        worst = max(worst, abs(omega - ref) / ref)
    return CheckResult(name="resonant frequency independent of a", passed=worst <= tol, value=worst, threshold=tol)


# -----------------------------
# Forward solver
# -----------------------------
def check_reciprocity(config: ScenarioConfig, omega: float = 2.0, tol: float = 0.02) -> CheckResult:
    """
    yhat . V^inf(yhat; p-wave theta) = -theta . V^inf(-theta; p-wave -yhat), and
    4 pi (lam + 2 mu) yhat . G^inf(yhat, x) q = q . U^t(x) for the wave yhat e^{-i kp yhat.x}.
    """
    medium = build_phantom(config)
    bs = BackgroundSolver(medium, omega)
    theta = np.asarray(config.incidence.unit_theta())
    yhat = np.array([0.0, 0.6, 0.8])

    u1 = bs.solve_wave(PlaneWave.pressure(theta, omega)).values
    u2 = bs.solve_wave(PlaneWave.pressure(-yhat, omega)).values
    p1, _ = bs.far_field_at(yhat[None, :], u1)
    p2, _ = bs.far_field_at(-theta[None, :], u2)
    far = _rel(yhat @ p1[0], -(theta @ p2[0]))

    wave = PlaneWave.pressure(-yhat, omega, beta=-1.0)
    u_wave = bs.solve_wave(wave).values
    c = 2.5 * config.domain.radius
    points = np.array([[c, 0, 0], [0, -c, 0], [0, 0, c], [c, c, -c]]) / np.array([1, 1, 1, np.sqrt(3)])[:, None]
    points = points + np.asarray(config.domain.center)[None, :]
    q = np.array([0.3, -0.5, 0.8])
    worst_mixed = 0.0
    for x in points:
        g = bs.green_fields(x, [q])[0]
        ps, _ = bs.far_field_at(yhat[None, :], g)
        pi, _ = far_field_from_sources(yhat[None, :], x[None, :], q[None, :], omega, medium)
        lhs = 4.0 * np.pi * medium.p_modulus * (yhat @ (ps[0] + pi[0]))
        total = plane_wave_field(wave, x, medium) + bs.scattered_at(x, u_wave)[0]
        worst_mixed = max(worst_mixed, _rel(lhs, q @ total))
    worst = max(far, worst_mixed)
    return CheckResult(
        name="far-field and mixed reciprocity", passed=worst <= tol, value=worst, threshold=tol,
        detail=f"far-field {far:.2e}, mixed {worst_mixed:.2e}",
    )


def check_asymptotic_slope(
    config: ScenarioConfig,
    c1: float = 20.0,
    b: float = 2.0,
    sign: int = 1,
    scales=(0.1, 0.05, 0.025),
    min_slope: float = 0.7,
) -> CheckResult:
    """
    |U^s - dominant term| / |dominant term| at one exterior point for an
    inclusion in the homogeneous host, against a. The reference ball has a
    three-fold resonance, so the dominant term goes through the cluster E_B.
    The oblique mixed p/s wave excites every direction of the cluster.
    """
    medium = _medium(config)
    eig = newtonian_eigensystem(reference_ball(config.reference_shape.resolution), medium)
    z = np.asarray(config.domain.center, dtype=float)
    x = z + np.array([0.0, 0.0, 3.0 * config.domain.radius])
    host = ball_grid(z, config.domain.radius, 3)
    errs = []
    for a in scales:
        res = build_resonance(eig, a, c1, h=config.resonance.h, b=b, sign=sign)
        wave = PlaneWave(
            theta=np.ones(3) / np.sqrt(3.0), theta_perp=np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0),
            beta1=1.0, beta2=1.0, omega=res.omega,
        )
        bs = BackgroundSolver(medium, res.omega, grid=host)
        sol = solve_with_inclusion(medium, wave, None, Inclusion(z=z, a=a, c1=c1, gridB=eig.grid), solver=bs)
        full = inclusion_scattered_at(bs, sol, x[None, :])[0]
        lead = asymptotic_scattered(plane_wave_field(wave, z, medium), kupradze_tensor(x - z, res.omega, medium), res)
        errs.append(float(np.linalg.norm(full - lead) / np.linalg.norm(lead)))
    slope = loglog_slope(scales, errs)
    return CheckResult(
        name="dominant term remainder decays with a", passed=slope >= min_slope, value=slope, threshold=min_slope,
        detail=", ".join(f"a={a:g}: {e:.3e}" for a, e in zip(scales, errs)),
    )


# -----------------------------
# Inversion building blocks
# -----------------------------
def check_fd_order(config: ScenarioConfig, low: float = 1.8, high: float = 2.2) -> CheckResult:
    """Navier operator of c e^{k.x} by finite differences against ((lam + mu) k (k.c) + mu |k|^2 c) e^{k.x}."""
    m = config.medium
    k = np.array([0.7, -0.4, 0.5])
    c = np.array([1.0, 0.5, -0.3])
    exact = (m.lam + m.mu) * k * (k @ c) + m.mu * (k @ k) * c
    hs = np.array([0.2, 0.1, 0.05])
    errs = []
    for h in hs:
        ax = (np.arange(5) - 2) * h
        X = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
        field = np.exp(X @ k)[..., None] * c
        L = elastic_laplacian_fd(field, m.lam, m.mu, h)
        errs.append(np.linalg.norm(L[2, 2, 2] - exact))
    slope = loglog_slope(hs, errs)
    return CheckResult(
        name="finite-difference Navier operator order", passed=low <= slope <= high, value=slope,
        threshold=low, detail=f"accepted range [{low}, {high}]",
    )


def check_tikhonov(config: ScenarioConfig, omega: float = 1.0, max_disc: float = 0.05) -> CheckResult:
    """Discrepancy non-increasing and kernel norm non-decreasing as alpha shrinks; the sweep reaches max_disc."""
    medium = _medium(config)
    sphere = gauss_sphere(config.sphere.n_theta)
    surface = MeasurementSurfaceK.ball(
        sphere, config.surface.radius_factor * config.domain.radius, center=config.domain.center
    )
    system = HerglotzSystem(surface, sphere, omega, medium)
    b = system.point_source_rhs(config.surface.anchors[0], [[1.0, 0.0, 0.0]])[:, 0]
    record = system.sweep(b, config.tikhonov.alphas())
    disc = np.array([r[1] for r in record])
    norm = np.array([r[2] for r in record])
    slack = 1e-12 * max(float(disc.max()), float(norm.max()))
    monotone = bool(
        np.all(np.diff(disc) <= slack) and np.all(np.diff(norm) >= -slack) and disc[-1] < disc[0] and norm[-1] > norm[0]
    )
    best = float(disc.min())
    return CheckResult(
        name="Tikhonov sweep", passed=monotone and best <= max_disc, value=best, threshold=max_disc,
        detail="monotone" if monotone else "not monotone in alpha",
    )


CHECKS: List[Callable[[ScenarioConfig], CheckResult]] = [
    check_series_agreement,
    check_kelvin_limit,
    check_kelvin_symmetry,
    check_eigen_scaling,
    check_resonance_invariance,
    check_reciprocity,
    check_asymptotic_slope,
    check_fd_order,
    check_tikhonov,
]


def run_verification(config: ScenarioConfig) -> List[CheckResult]:
    results = []
    for check in CHECKS:
        try:
            r = check(config)
        except Exception as e:
            logger.error("%s raised %s: %s", check.__name__, type(e).__name__, e)
            r = CheckResult(name=check.__name__, passed=False, detail=f"{type(e).__name__}: {e}")
        logger.info("%s: %s (value %s)", r.name, "ok" if r.passed else "FAILED", r.value)
        results.append(r)
    return results
