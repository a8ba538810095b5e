from __future__ import annotations

import heapq
import logging
from typing import Optional, Tuple

import numpy as np

from elastic_imaging.domain.enums import MaskReason
from elastic_imaging.domain.errors import DirectionMismatchError, IndeterminateSignError, InsufficientContrastError
from elastic_imaging.domain.medium import ElasticMedium, PlaneWave
from elastic_imaging.domain.result import DensityEstimate, RecoveredField
from elastic_imaging.domain.spectrum import ResonanceInfo
from elastic_imaging.services.forward.asymptotics import dominant_factor

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi
_AXES = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


# -----------------------------
# Step 1: squared moment from backscatter
# -----------------------------
def step1_backscatter_moment(
    U_back,
    V_back,
    xhat,
    wave: PlaneWave,
    res: ResonanceInfo,
    medium: ElasticMedium,
    noise_floor: float = 0.0,
) -> complex:
    """
    (V^t(z) . m)^2 = 4 pi (omega_n0^2 - omega^2) / (a c1 omega^2 omega_n0^2)
                     * (U^inf - V^inf)(xhat) . ((lam + 2 mu) beta1 theta + mu beta2 theta_perp)
    with xhat = -theta the backscatter direction of `wave`.
    """
    x = np.asarray(xhat, dtype=float).reshape(3)
    if not np.allclose(x, -wave.theta, rtol=0.0, atol=1e-12):
        raise DirectionMismatchError("backscatter data must be observed at -theta")
    diff = np.asarray(U_back, dtype=complex).reshape(3) - np.asarray(V_back, dtype=complex).reshape(3)
    if np.linalg.norm(diff) < noise_floor:
        raise InsufficientContrastError(
            f"|U - V| = {np.linalg.norm(diff):.3e} is below the noise floor {noise_floor:.3e}"
        )
    weight = wave.reciprocity_weight(medium)
    return complex(FOUR_PI / dominant_factor(res) * (diff @ weight))


# -----------------------------
# Sign resolution
# -----------------------------
def _neighbours(idx: Tuple[int, int, int], shape) -> list:
    out = []
    for ax in _AXES:
        for sgn in (1, -1):
            j = (idx[0] + sgn * ax[0], idx[1] + sgn * ax[1], idx[2] + sgn * ax[2])
            if all(0 <= j[k] < shape[k] for k in range(3)):
                out.append(j)
    return out


def _predict(idx, values: np.ndarray, assigned: np.ndarray) -> Optional[complex]:
    """Mean of the linear extrapolations from each assigned axis neighbour."""
    shape = assigned.shape
    preds = []
    for ax in _AXES:
        for sgn in (1, -1):
            j1 = tuple(idx[k] + sgn * ax[k] for k in range(3))
            if not all(0 <= j1[k] < shape[k] for k in range(3)) or not assigned[j1]:
                continue
            j2 = tuple(idx[k] + 2 * sgn * ax[k] for k in range(3))
            if all(0 <= j2[k] < shape[k] for k in range(3)) and assigned[j2]:
                preds.append(2.0 * values[j1] - values[j2])
            else:
                preds.append(values[j1])
    if not preds:
        return None
    return complex(np.mean(preds))


def resolve_sign(squared: np.ndarray, tau_factor: float = 1e-3) -> Tuple[np.ndarray, np.ndarray]:
    """
    Square roots of the squared moments on the lattice with consistent signs.

    Region growing from the strongest node (principal root), visiting nodes by
    descending magnitude; each node takes the root closest to the extrapolation
    from its assigned neighbours. Nodes below tau = tau_factor * max|root| are
    indeterminate (NaN, sign 0). Each connected region is seeded on its own.
    Returns (signed values, sign relative to the principal root).
    """
    sq = np.asarray(squared, dtype=complex)
    shape = sq.shape
    roots = np.sqrt(sq)
    mag = np.abs(roots)
    finite = np.isfinite(roots)
    if not np.any(finite):
        raise IndeterminateSignError("no finite squared moment on the lattice")
    tau = tau_factor * float(mag[finite].max())
    usable = finite & (mag >= tau) & (mag > 0)
    if not np.any(usable):
        raise IndeterminateSignError("every lattice node is below the guard threshold")

    signed = np.full(shape, np.nan + 0j, dtype=complex)
    sign = np.zeros(shape, dtype=np.int8)
    assigned = np.zeros(shape, dtype=bool)
    regions = 0

    while True:
        remaining = usable & ~assigned
        if not np.any(remaining):
            break
        seed = np.unravel_index(int(np.argmax(np.where(remaining, mag, -1.0))), shape)
        regions += 1
        signed[seed] = roots[seed]
        sign[seed] = 1
        assigned[seed] = True
        heap = []
        queued = {seed}
        for j in _neighbours(seed, shape):
            if usable[j] and not assigned[j] and j not in queued:
                heapq.heappush(heap, (-mag[j], np.ravel_multi_index(j, shape)))
                queued.add(j)
        while heap:
            _, flat = heapq.heappop(heap)
            idx = np.unravel_index(flat, shape)
            pred = _predict(idx, signed, assigned)
            r = roots[idx]
            s = 1 if pred is None or abs(r - pred) <= abs(-r - pred) else -1
            signed[idx] = s * r
            sign[idx] = s
            assigned[idx] = True
            for j in _neighbours(idx, shape):
                if usable[j] and not assigned[j] and j not in queued:
                    heapq.heappush(heap, (-mag[j], np.ravel_multi_index(j, shape)))
                    queued.add(j)

    if regions > 1:
        logger.warning("sign resolution found %d disconnected regions; each carries its own global sign", regions)
    n_ind = int(np.sum(~usable))
    if n_ind:
        logger.info("%d lattice nodes indeterminate (below tau=%.3e)", n_ind, tau)
    return signed, sign


# -----------------------------
# Step 3: Green's moment at the anchor
# -----------------------------
def step3_green_moment(difference, signed_moment: complex, res: ResonanceInfo, tau: float = 0.0) -> Optional[np.ndarray]:
    """
    G(x, z) m = (omega_n0^2 - omega^2) / (c1 a omega^2 omega_n0^2) * (U^s - V^s)(x) / (V^t(z) . m).
    None when the signed moment is masked or below tau.
    """
    s = complex(signed_moment)
    if not np.isfinite(s) or abs(s) < tau or s == 0:
        return None
    diff = np.asarray(difference, dtype=complex).reshape(3)
    return diff / (dominant_factor(res) * s)


# -----------------------------
# Steps 4-5: Navier operator and density
# -----------------------------
def elastic_laplacian_fd(field: np.ndarray, lam: float, mu: float, spacing: float) -> np.ndarray:
    """
    (lam + mu) grad div f + mu Lap f by second-order central differences on a
    lattice field of shape (n1, n2, n3, 3). Nodes whose 18-point stencil leaves
    the lattice or touches a NaN come out NaN.
    """
    f = np.asarray(field, dtype=complex)
    n1, n2, n3 = f.shape[:3]
    P = np.pad(f, ((1, 1), (1, 1), (1, 1), (0, 0)), constant_values=np.nan)

    def sh(d):
        return P[1 + d[0]:1 + d[0] + n1, 1 + d[1]:1 + d[1] + n2, 1 + d[2]:1 + d[2] + n3]

    h2 = spacing ** 2
    second = []
    for ax in _AXES:
        minus = tuple(-v for v in ax)
        second.append((sh(ax) - 2.0 * f + sh(minus)) / h2)
    lap = second[0] + second[1] + second[2]

    grad_div = np.zeros_like(f)
    for i in range(3):
        acc = second[i][..., i].copy()
        for j in range(3):
            if j == i:
                continue
            ei, ej = np.array(_AXES[i]), np.array(_AXES[j])
            mixed = (
                sh(tuple(ei + ej)) - sh(tuple(ei - ej)) - sh(tuple(-ei + ej)) + sh(tuple(-ei - ej))
            )[..., j] / (4.0 * h2)
            acc = acc + mixed
        grad_div[..., i] = acc
    return (lam + mu) * grad_div + mu * lap


def extract_density(
    green_moment_field: RecoveredField,
    omega: float,
    lam: float,
    mu: float,
    spacing: float,
    tau_f_factor: float = 1e-3,
) -> DensityEstimate:
    """
    rho_0 = Re sum_j -conj(F_j) (Lap^e F)_j / (omega^2 sum_j |F_j|^2) over components
    with |F_j| >= tau_f_factor * max|F|; the imaginary part is kept as a residual.
    """
    F = np.asarray(green_moment_field.values, dtype=complex)
    shape = F.shape[:3]
    L = elastic_laplacian_fd(F, lam, mu, spacing)
    rho = np.full(shape, np.nan)
    im = np.full(shape, np.nan)
    valid = np.zeros(shape, dtype=bool)
    reasons = np.full(shape, MaskReason.NONE, dtype=object)

    absF = np.abs(F)
    finite_F = np.all(np.isfinite(F), axis=-1)
    fmax = float(absF[finite_F].max()) if np.any(finite_F) else 0.0
    tau_f = tau_f_factor * fmax

    for idx in np.ndindex(shape):
        if not finite_F[idx]:
            reasons[idx] = MaskReason.NUMERICAL
            continue
        if not np.all(np.isfinite(L[idx])):
            reasons[idx] = MaskReason.STENCIL
            continue
        sel = absF[idx] >= tau_f
        if not np.any(sel) or fmax == 0.0:
            reasons[idx] = MaskReason.SMALL_DENOMINATOR
            continue
        Fj = F[idx][sel]
        Lj = L[idx][sel]
        ratio = np.sum(-np.conj(Fj) * Lj) / (omega ** 2 * np.sum(np.abs(Fj) ** 2))
        if not np.isfinite(ratio):
            reasons[idx] = MaskReason.NUMERICAL
            continue
        rho[idx] = ratio.real
        im[idx] = ratio.imag
        valid[idx] = True
    return DensityEstimate(rho=rho, im_residual=im, valid=valid, reasons=reasons)
