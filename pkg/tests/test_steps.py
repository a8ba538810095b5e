import numpy as np
import pytest

from elastic_imaging.domain.enums import MaskReason
from elastic_imaging.domain.errors import DirectionMismatchError, IndeterminateSignError, InsufficientContrastError
from elastic_imaging.domain.medium import ElasticMedium, PlaneWave
from elastic_imaging.domain.result import RecoveredField
from elastic_imaging.services.forward.asymptotics import dominant_factor
from elastic_imaging.services.inversion.steps import (
    elastic_laplacian_fd,
    extract_density,
    resolve_sign,
    step1_backscatter_moment,
    step3_green_moment,
)
from elastic_imaging.services.kernels.elastic import kupradze_tensor
from elastic_imaging.services.spectrum.newtonian import build_resonance


@pytest.fixture
def resonance(eig_small):
    return build_resonance(eig_small, a=0.05, c1=2.0)


def _lattice(n, h):
    ax = (np.arange(n) - (n - 1) / 2) * h
    return np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)


# -----------------------------
# Step 1
# -----------------------------
def test_step1_inverts_the_backscatter_formula(resonance, homogeneous):
    wave = PlaneWave(theta=[0, 0, 1], theta_perp=[1, 0, 0], beta1=1.0, beta2=0.3j, omega=resonance.omega)
    w = wave.reciprocity_weight(homogeneous)
    s = 0.4 - 0.2j
    # any difference with w . diff = C s^2 / (4 pi)
    diff = w.conj() / np.vdot(w, w) * dominant_factor(resonance) * s ** 2 / (4 * np.pi)
    V = np.array([0.1, 0.2, 0.3j])
    sq = step1_backscatter_moment(V + diff, V, -wave.theta, wave, resonance, homogeneous)
    assert sq == pytest.approx(s ** 2, rel=1e-12)


def test_step1_requires_backscatter_direction(resonance, homogeneous):
    wave = PlaneWave.pressure([0, 0, 1], resonance.omega)
    with pytest.raises(DirectionMismatchError):
        step1_backscatter_moment(np.ones(3), np.zeros(3), [0, 0, 1], wave, resonance, homogeneous)


def test_step1_noise_floor(resonance, homogeneous):
    wave = PlaneWave.pressure([0, 0, 1], resonance.omega)
    V = np.array([1.0, 0.0, 0.0])
    with pytest.raises(InsufficientContrastError):
        step1_backscatter_moment(V + 1e-9, V, [0, 0, -1], wave, resonance, homogeneous, noise_floor=1e-6)


# -----------------------------
# Sign resolution
# -----------------------------
def test_resolve_sign_recovers_smooth_field_up_to_global_sign():
    X = _lattice(5, 0.2)
    truth = (1.0 + 0.5 * X[..., 0] + 0.3j * X[..., 1]) * np.exp(1j * 1.2 * X[..., 2])
    signed, sign = resolve_sign(truth ** 2)
    g = signed[2, 2, 2] / truth[2, 2, 2]
    assert g == pytest.approx(1.0) or g == pytest.approx(-1.0)
    np.testing.assert_allclose(signed, g.real * truth, rtol=1e-10)
    assert np.all(np.abs(sign) == 1)


def test_resolve_sign_marks_small_nodes_indeterminate():
    sq = np.ones((3, 3, 3), dtype=complex)
    sq[0, 0, 0] = 1e-12
    signed, sign = resolve_sign(sq, tau_factor=1e-3)
    assert np.isnan(signed[0, 0, 0])
    assert sign[0, 0, 0] == 0
    assert np.all(sign.reshape(-1)[1:] != 0)


def test_resolve_sign_all_below_threshold():
    with pytest.raises(IndeterminateSignError):
        resolve_sign(np.zeros((3, 3, 3), dtype=complex))
    with pytest.raises(IndeterminateSignError):
        resolve_sign(np.full((3, 3, 3), np.nan + 0j))


# -----------------------------
# Step 3
# -----------------------------
def test_step3_divides_out_factor_and_moment(resonance):
    Gm = np.array([0.1 + 0.2j, -0.3, 0.05j])
    s = 0.7 + 0.1j
    diff = dominant_factor(resonance) * s * Gm
    np.testing.assert_allclose(step3_green_moment(diff, s, resonance), Gm)


def test_step3_masks_small_or_missing_moment(resonance):
    assert step3_green_moment(np.ones(3), 1e-6, resonance, tau=1e-3) is None
    assert step3_green_moment(np.ones(3), np.nan, resonance) is None
    assert step3_green_moment(np.ones(3), 0.0, resonance) is None


# -----------------------------
# Steps 4-5
# -----------------------------
def test_fd_operator_is_second_order():
    lam, mu = 1.0, 1.0
    k = np.array([0.7, -0.4, 0.5])
    c = np.array([1.0, 0.5, -0.3])
    exact = (lam + mu) * k * (k @ c) + mu * (k @ k) * c
    hs = np.array([0.2, 0.1, 0.05])
    errs = []
    for h in hs:
        X = _lattice(5, h)
        field = np.exp(X @ k)[..., None] * c
        errs.append(np.linalg.norm(elastic_laplacian_fd(field, lam, mu, h)[2, 2, 2] - exact))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 1.8 <= slope <= 2.2


def test_fd_operator_masks_outer_layer():
    L = elastic_laplacian_fd(np.ones((4, 4, 4, 3)), 1.0, 1.0, 0.1)
    assert np.all(np.isnan(L[0]))
    assert np.all(np.isfinite(L[1:3, 1:3, 1:3]))


def test_extract_density_from_plane_wave():
    # c_p^2 rho = lam + 2 mu, so the p-wave theta e^{i omega sqrt(rho/(lam+2mu)) theta.x} has density rho
    lam, mu, rho, omega, h = 1.0, 1.0, 2.0, 1.0, 0.05
    kp = omega * np.sqrt(rho / (lam + 2 * mu))
    theta = np.array([1.0, 2.0, 2.0]) / 3.0
    X = _lattice(5, h)
    F = theta * np.exp(1j * kp * (X @ theta))[..., None]
    est = extract_density(
        RecoveredField(values=F, sign_mask=np.ones((5, 5, 5)), anchor_x=np.array([0.0, 0.0, 3.0])), omega, lam, mu, h
    )
    assert est.valid[2, 2, 2]
    assert est.rho[2, 2, 2] == pytest.approx(rho, rel=1e-3)
    assert abs(est.im_residual[2, 2, 2]) < 1e-3
    assert est.reasons[0, 0, 0] == MaskReason.STENCIL
    assert not est.valid[0, 2, 2]


def test_extract_density_flags_missing_values():
    F = np.ones((3, 3, 3, 3), dtype=complex)
    F[1, 1, 1] = np.nan
    est = extract_density(
        RecoveredField(values=F, sign_mask=np.ones((3, 3, 3)), anchor_x=np.array([0.0, 0.0, 3.0])), 1.0, 1.0, 1.0, 0.1
    )
    assert est.reasons[1, 1, 1] == MaskReason.NUMERICAL
    assert not est.valid.any()


def test_extract_density_is_sign_invariant():
    lam, mu, omega, h = 1.0, 1.0, 1.3, 0.1
    k = omega * np.sqrt(1.5 / mu)
    X = _lattice(3, h)
    F = np.array([1.0, 0.0, 0.0]) * np.exp(1j * k * X[..., 2])[..., None]
    rec = RecoveredField(values=F, sign_mask=np.ones((3, 3, 3)), anchor_x=np.array([0.0, 0.0, 3.0]))
    flipped = RecoveredField(values=-F, sign_mask=-np.ones((3, 3, 3)), anchor_x=np.array([0.0, 0.0, 3.0]))
    a = extract_density(rec, omega, lam, mu, h)
    b = extract_density(flipped, omega, lam, mu, h)
    assert a.rho[1, 1, 1] == pytest.approx(b.rho[1, 1, 1], rel=1e-14)
    # transverse wave along z with speed sqrt(mu / rho)
    assert a.rho[1, 1, 1] == pytest.approx(1.5, rel=1e-2)


@pytest.mark.parametrize("omega", [0.55, 1.2])
def test_extract_density_from_green_column(omega):
    medium = ElasticMedium(lam=1.0, mu=1.0, rho_tilde=1.0)
    h = 0.02
    x = np.array([0.0, 0.0, 3.0])
    v = np.array([1.0, 0.5, -0.3])
    X = _lattice(5, h)
    F = kupradze_tensor(X - x, omega, medium) @ v
    est = extract_density(
        RecoveredField(values=F, sign_mask=np.ones((5, 5, 5)), anchor_x=x), omega, medium.lam, medium.mu, h
    )
    interior = est.rho[1:4, 1:4, 1:4]
    assert est.valid[1:4, 1:4, 1:4].all()
    np.testing.assert_allclose(interior, medium.rho_tilde, rtol=5e-3)
