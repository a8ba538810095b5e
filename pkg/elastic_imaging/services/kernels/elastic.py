from __future__ import annotations

import logging
import math
from typing import Tuple

import numpy as np

from elastic_imaging.domain.errors import SingularityError
from elastic_imaging.domain.medium import ElasticMedium, PlaneWave, Wavenumbers, check_lame

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi
COINCIDENT_TOL = 1e-14

# Below this value of kappa_s * r the closed form is replaced by the series.
SERIES_SWITCH = 1e-2
SERIES_TERMS_SMALL = 12


def wavenumbers(medium: ElasticMedium, omega: float) -> Wavenumbers:
    if omega < 0:
        raise ValueError(f"omega must be >= 0, got {omega}")
    check_lame(medium.lam, medium.mu)
    c_s = math.sqrt(medium.mu / medium.rho_tilde)
    c_p = math.sqrt(medium.p_modulus / medium.rho_tilde)
    return Wavenumbers(kappa_p=omega / c_p, kappa_s=omega / c_s, c_p=c_p, c_s=c_s)


# -----------------------------
# Radial coefficients
# -----------------------------
# Every tensor below has the form A(r) I + B(r) rhat rhat^T.

def _closed_coeffs(r: np.ndarray, omega: float, medium: ElasticMedium) -> Tuple[np.ndarray, np.ndarray]:
    wn = wavenumbers(medium, omega)
    ks, kp = wn.kappa_s, wn.kappa_p
    es = np.exp(1j * ks * r)
    ep = np.exp(1j * kp * r)
    inv_r = 1.0 / r
    inv_r2 = inv_r * inv_r
    inv_r3 = inv_r2 * inv_r

    # first and second radial derivatives of (e^{i ks r} - e^{i kp r}) / r
    d1 = es * (1j * ks * inv_r - inv_r2) - ep * (1j * kp * inv_r - inv_r2)
    d2 = (
        es * (-ks ** 2 * inv_r - 2j * ks * inv_r2 + 2.0 * inv_r3)
        - ep * (-kp ** 2 * inv_r - 2j * kp * inv_r2 + 2.0 * inv_r3)
    )
    c = 1.0 / (FOUR_PI * omega ** 2 * medium.rho_tilde)
    A = es * inv_r / (FOUR_PI * medium.mu) + c * d1 * inv_r
    B = c * (d2 - d1 * inv_r)
    return A, B


def _series_coefficients(omega: float, medium: ElasticMedium, n_terms: int) -> Tuple[np.ndarray, np.ndarray]:
    wn = wavenumbers(medium, omega) if omega > 0 else None
    c_s = math.sqrt(medium.mu / medium.rho_tilde) if wn is None else wn.c_s
    c_p = math.sqrt(medium.p_modulus / medium.rho_tilde) if wn is None else wn.c_p
    pre = 1.0 / (FOUR_PI * medium.rho_tilde)
    ca = np.zeros(n_terms, dtype=complex)
    cb = np.zeros(n_terms, dtype=complex)
    for n in range(n_terms):
        base = (1j ** n) * omega ** n / ((n + 2) * math.factorial(n))
        ca[n] = pre * base * ((n + 1) / c_s ** (n + 2) + 1.0 / c_p ** (n + 2))
        cb[n] = -pre * base * (n - 1) * (1.0 / c_s ** (n + 2) - 1.0 / c_p ** (n + 2))
    return ca, cb


def _series_coeffs(r: np.ndarray, omega: float, medium: ElasticMedium, n_terms: int) -> Tuple[np.ndarray, np.ndarray]:
    ca, cb = _series_coefficients(omega, medium, n_terms)
    A = np.zeros(r.shape, dtype=complex)
    B = np.zeros(r.shape, dtype=complex)
    power = 1.0 / r  # r^{n-1}
    for n in range(n_terms):
        A += ca[n] * power
        B += cb[n] * power
        power = power * r
    return A, B


def _assemble(rvec: np.ndarray, r: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    rhat = rvec / r[..., None]
    eye = np.eye(3)
    return A[..., None, None] * eye + B[..., None, None] * (rhat[..., :, None] * rhat[..., None, :])


def _separation(rvec) -> Tuple[np.ndarray, np.ndarray]:
    rv = np.asarray(rvec, dtype=float)
    r = np.linalg.norm(rv, axis=-1)
    if np.any(r <= COINCIDENT_TOL):
        raise SingularityError("fundamental tensor evaluated at coincident points (x = y)")
    return rv, r


# -----------------------------
# Kupradze (frequency omega) and Kelvin (static) tensors
# -----------------------------
def kupradze_tensor(rvec, omega: float, medium: ElasticMedium) -> np.ndarray:
    """Gamma^omega for separation vectors rvec = x - y of shape (..., 3); returns (..., 3, 3)."""
    if not omega > 0:
        raise ValueError(f"omega must be > 0, got {omega}")
    rv, r = _separation(rvec)
    ks = wavenumbers(medium, omega).kappa_s
    small = ks * r < SERIES_SWITCH
    A = np.empty(r.shape, dtype=complex)
    B = np.empty(r.shape, dtype=complex)
    if np.any(~small):
        A[~small], B[~small] = _closed_coeffs(r[~small], omega, medium)
    if np.any(small):
        A[small], B[small] = _series_coeffs(r[small], omega, medium, SERIES_TERMS_SMALL)
    return _assemble(rv, r, A, B)


def kupradze_matrix(x, y, omega: float, medium: ElasticMedium) -> np.ndarray:
    return kupradze_tensor(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), omega, medium)


def kupradze_series(x, y, omega: float, medium: ElasticMedium, n_terms: int = 30) -> np.ndarray:
    """Entrywise power series of Gamma^omega truncated after n_terms terms (n = 0 gives Kelvin)."""
    if omega < 0:
        raise ValueError("omega must be >= 0")
    rv, r = _separation(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    A, B = _series_coeffs(np.atleast_1d(r), omega, medium, n_terms)
    out = _assemble(np.atleast_2d(rv), np.atleast_1d(r), A, B)
    return out.reshape(rv.shape[:-1] + (3, 3))


def kelvin_tensor(rvec, medium: ElasticMedium) -> np.ndarray:
    rv, r = _separation(rvec)
    A = medium.gamma1 / (FOUR_PI * r)
    B = medium.gamma2 / (FOUR_PI * r)
    return _assemble(rv, r, A, B)


def kelvin_matrix(x, y, medium: ElasticMedium) -> np.ndarray:
    return kelvin_tensor(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), medium)


def equivalent_radius(cell_volume: float) -> float:
    return (3.0 * cell_volume / FOUR_PI) ** (1.0 / 3.0)


def kelvin_self_block(cell_volume: float, medium: ElasticMedium) -> np.ndarray:
    """Integral of the Kelvin tensor over the ball with the cell's volume, centred at the evaluation point."""
    R = equivalent_radius(cell_volume)
    return 0.5 * R ** 2 * (medium.gamma1 + medium.gamma2 / 3.0) * np.eye(3)


def kupradze_self_remainder(omega: float, medium: ElasticMedium) -> np.ndarray:
    """lim_{r->0} (Gamma^omega - Gamma^0)."""
    wn = wavenumbers(medium, omega)
    c = 1j * omega / (12.0 * np.pi * medium.rho_tilde) * (2.0 / wn.c_s ** 3 + 1.0 / wn.c_p ** 3)
    return c * np.eye(3)


def kupradze_self_block(cell_volume: float, omega: float, medium: ElasticMedium) -> np.ndarray:
    return kelvin_self_block(cell_volume, medium) + kupradze_self_remainder(omega, medium) * cell_volume


# -----------------------------
# Far-field kernels and plane waves
# -----------------------------
def farfield_pattern(xhat, y, omega: float, medium: ElasticMedium) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xhat, dtype=float).reshape(3)
    if abs(np.linalg.norm(x) - 1.0) > 1e-12:
        raise ValueError("xhat must be a unit vector")
    wn = wavenumbers(medium, omega)
    yv = np.asarray(y, dtype=float).reshape(3)
    proj = np.outer(x, x)
    p = proj * np.exp(-1j * wn.kappa_p * (x @ yv)) / (FOUR_PI * medium.p_modulus)
    s = (np.eye(3) - proj) * np.exp(-1j * wn.kappa_s * (x @ yv)) / (FOUR_PI * medium.mu)
    return p, s


def farfield_phases(directions, points, omega: float, medium: ElasticMedium) -> Tuple[np.ndarray, np.ndarray]:
    """
    Scalar factors of the far-field kernels for every (direction, point) pair:
    e^{-i kp xhat.y} / (4 pi (lam + 2 mu)) and e^{-i ks xhat.y} / (4 pi mu), each (M, N).
    """
    wn = wavenumbers(medium, omega)
    dots = np.asarray(directions, dtype=float) @ np.asarray(points, dtype=float).T
    p = np.exp(-1j * wn.kappa_p * dots) / (FOUR_PI * medium.p_modulus)
    s = np.exp(-1j * wn.kappa_s * dots) / (FOUR_PI * medium.mu)
    return p, s


def plane_wave_field(wave: PlaneWave, x, medium: ElasticMedium) -> np.ndarray:
    wn = wavenumbers(medium, wave.omega)
    pts = np.asarray(x, dtype=float)
    phase = pts @ wave.theta
    out = (
        wave.beta1 * np.exp(1j * wn.kappa_p * phase)[..., None] * wave.theta
        + wave.beta2 * np.exp(1j * wn.kappa_s * phase)[..., None] * wave.theta_perp
    )
    return out


def mirrored_wave(xhat, xhat_perp, beta1: complex, beta2: complex, omega: float) -> PlaneWave:
    """
    The plane wave V^i(., -xhat) produced by contracting a far-field kernel at
    xhat with (lam + 2 mu) beta1 xhat + mu beta2 xhat_perp, times 4 pi.
    """
    x = np.asarray(xhat, dtype=float).reshape(3)
    return PlaneWave(theta=-x, theta_perp=xhat_perp, beta1=-complex(beta1), beta2=complex(beta2), omega=omega)
