"""Dominant resonant term of the field scattered by the injected inclusion."""
from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from elastic_imaging.domain.errors import ZeroDetuningError
from elastic_imaging.domain.farfield import tangent_frames
from elastic_imaging.domain.medium import ElasticMedium, PlaneWave
from elastic_imaging.domain.spectrum import ResonanceInfo

FOUR_PI = 4.0 * np.pi


def dominant_factor(res: ResonanceInfo, c1: Optional[float] = None, a: Optional[float] = None) -> float:
    """c1 a omega^2 omega_n0^2 / (omega_n0^2 - omega^2)"""
    c1 = res.c1 if c1 is None else c1
    a = res.a if a is None else a
    d = res.detuning()
    if d == 0.0:
        raise ZeroDetuningError("incident frequency equals the resonance; detune with b > 0")
    return c1 * a * res.omega ** 2 * res.omega_n0 ** 2 / d


def asymptotic_scattered(
    Vt_z,
    G_col,
    res: ResonanceInfo,
    c1: Optional[float] = None,
    a: Optional[float] = None,
) -> np.ndarray:
    """U^s(x) - V^s(x) ~ C G(x, z) E_B V^t(z), with G_col = G(x, z)."""
    V = np.asarray(Vt_z, dtype=complex).reshape(3)
    G = np.asarray(G_col, dtype=complex).reshape(3, 3)
    return dominant_factor(res, c1, a) * (G @ (res.E_B @ V))


def green_farfield_moment(bank_z, directions, moment, medium: ElasticMedium) -> Tuple[np.ndarray, np.ndarray]:
    """
    p- and s-parts of G^inf(y, z) m at each direction y, from the reciprocal
    bank of total fields at z, shape (M, 3, 3) as built by BackgroundSolver.
    The moment may be complex (E_B V^t(z) for a degenerate resonance).
    """
    dirs = np.asarray(directions, dtype=float).reshape(-1, 3)
    bank = np.asarray(bank_z, dtype=complex).reshape(dirs.shape[0], 3, 3)
    m = np.asarray(moment).reshape(3)
    t1, t2 = tangent_frames(dirs)
    c = bank @ m                                                   # (M, 3)
    p = dirs * (c[:, 0] / (FOUR_PI * medium.p_modulus))[:, None]
    s = (t1 * c[:, 1][:, None] + t2 * c[:, 2][:, None]) / (FOUR_PI * medium.mu)
    return p, s


def asymptotic_farfield(
    Vt_z,
    bank_z,
    directions,
    res: ResonanceInfo,
    medium: ElasticMedium,
) -> Tuple[np.ndarray, np.ndarray]:
    """U^inf(y) - V^inf(y) ~ C G^inf(y, z) E_B V^t(z); (V^t . m) G^inf m when E_B = m m^T."""
    p = res.E_B @ np.asarray(Vt_z, dtype=complex).reshape(3)
    gp, gs = green_farfield_moment(bank_z, directions, p, medium)
    C = dominant_factor(res)
    return C * gp, C * gs


def asymptotic_backscatter(Vt_z, res: ResonanceInfo) -> complex:
    """
    Weighted backscatter difference w . (U^inf - V^inf)(-theta) with
    w = (lam + 2 mu) beta1 theta + mu beta2 theta_perp; equals C V^t(z) . E_B V^t(z) / (4 pi),
    which is C (V^t(z) . m)^2 / (4 pi) for a simple resonance.
    """
    V = np.asarray(Vt_z, dtype=complex).reshape(3)
    return dominant_factor(res) * complex(V @ (res.E_B @ V)) / FOUR_PI


def backscatter_direction(wave: PlaneWave) -> np.ndarray:
    return -wave.theta
