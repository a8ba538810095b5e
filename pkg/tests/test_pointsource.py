import numpy as np
import pytest

from elastic_imaging.domain.config import TikhonovConfig
from elastic_imaging.domain.errors import DirectionMismatchError
from elastic_imaging.domain.farfield import FarField
from elastic_imaging.domain.herglotz import MeasurementSurfaceK
from elastic_imaging.domain.medium import PlaneWave
from elastic_imaging.services.forward.far_field import gauss_sphere
from elastic_imaging.services.forward.lippmann_schwinger import BackgroundSolver
from elastic_imaging.services.inversion.steps import elastic_laplacian_fd
from elastic_imaging.services.kernels.elastic import kupradze_tensor, plane_wave_field
from elastic_imaging.services.pointsource.herglotz import (
    AlphaPolicy,
    HerglotzSystem,
    backproject,
    herglotz_apply,
    minimum_norm_kernel,
    noise_amplification_bound,
    recover_exterior_fields,
)
from elastic_imaging.services.scenario.phantom import build_phantom
from tests.scenarios import small_config

OMEGA = 1.5


@pytest.fixture(scope="module")
def kernel_sphere():
    return gauss_sphere(10)


@pytest.fixture(scope="module")
def system(kernel_sphere):
    medium = build_phantom(small_config()).homogeneous()
    surface = MeasurementSurfaceK.ball(kernel_sphere, 1.5)
    return HerglotzSystem(surface, kernel_sphere, OMEGA, medium)


def test_alpha_policy_from_config():
    policy = AlphaPolicy.from_config(TikhonovConfig())
    assert policy.alphas[0] == pytest.approx(1e-1)
    assert policy.alphas[-1] == pytest.approx(1e-9)
    assert len(policy.alphas) == 9
    assert policy.noise_floor == 1e-4


def test_tikhonov_sweep_is_monotone(system):
    b = system.point_source_rhs([0.0, 0.0, 3.0], [[1.0, 0.0, 0.0]])[:, 0]
    record = system.sweep(b, AlphaPolicy().alphas)
    disc = np.array([r[1] for r in record])
    norm = np.array([r[2] for r in record])
    assert np.all(np.diff(disc) <= 1e-12 * disc.max())
    assert np.all(np.diff(norm) >= -1e-12 * norm.max())
    assert disc[-1] < 0.05


def test_discrepancy_matches_herglotz_wave_on_surface(system):
    x = np.array([0.0, 0.0, 3.0])
    q = np.array([0.0, 1.0, 0.5])
    fit = system.fit(system.point_source_rhs(x, [q])[:, 0], AlphaPolicy())
    surface = system.surface
    Hg = herglotz_apply(fit.kernel, surface.nodes, system.medium, OMEGA)
    target = kupradze_tensor(surface.nodes - x[None, :], OMEGA, system.medium) @ q
    w = surface.weights[:, None]
    err = np.sqrt(np.sum(w * np.abs(Hg - target) ** 2) / np.sum(w * np.abs(target) ** 2))
    assert err == pytest.approx(fit.discrepancy, rel=1e-6)
    assert fit.discrepancy >= AlphaPolicy().noise_floor or fit.alpha == AlphaPolicy().alphas[0]


def test_minimum_norm_kernel_uses_the_same_solve(system):
    x = [2.5, 0.0, 0.0]
    kernel, disc = minimum_norm_kernel(
        system.surface, x, [1, 0, 0], OMEGA, system.medium, 1e-6, system=system
    )
    _, expected, _ = system.solve(system.point_source_rhs(x, [[1, 0, 0]])[:, 0], 1e-6)
    assert disc == pytest.approx(expected)
    assert kernel.sphere.size == system.sphere.size


def test_source_inside_surface_rejected(system):
    with pytest.raises(ValueError, match="outside K"):
        system.point_source_rhs([0.0, 0.0, 1.0], [[1, 0, 0]])


def test_backprojection_needs_mirrored_directions(system, kernel_sphere):
    kernel = system.fit(system.point_source_rhs([0, 0, 3.0], [[1, 0, 0]])[:, 0], AlphaPolicy()).kernel
    zeros = np.zeros((kernel_sphere.size, 3), dtype=complex)
    wrong = FarField(sphere=kernel_sphere, p_values=zeros, s_values=zeros)
    with pytest.raises(DirectionMismatchError):
        backproject(wrong, kernel, system.medium)


def test_backprojection_is_linear(system, kernel_sphere):
    kernel = system.fit(system.point_source_rhs([0, 0, 3.0], [[1, 0, 0]])[:, 0], AlphaPolicy()).kernel
    data_sphere = kernel_sphere.mirrored()
    rng = np.random.default_rng(3)
    nodes = data_sphere.nodes

    def random_far_field():
        a = rng.standard_normal(data_sphere.size) + 1j * rng.standard_normal(data_sphere.size)
        t = rng.standard_normal((data_sphere.size, 3)) + 1j * rng.standard_normal((data_sphere.size, 3))
        s = t - nodes * np.einsum("ki,ki->k", nodes, t)[:, None]
        return FarField(sphere=data_sphere, p_values=a[:, None] * nodes, s_values=s)

    f1, f2 = random_far_field(), random_far_field()
    m = system.medium
    total = backproject(f1 + f2, kernel, m)
    assert total == pytest.approx(backproject(f1, kernel, m) + backproject(f2, kernel, m), rel=1e-12)
    assert backproject(f1.scaled(2 - 1j), kernel, m) == pytest.approx((2 - 1j) * backproject(f1, kernel, m), rel=1e-12)


def test_noise_bound_scales_with_delta(system):
    kernel = system.fit(system.point_source_rhs([0, 0, 3.0], [[1, 0, 0]])[:, 0], AlphaPolicy()).kernel
    b1 = noise_amplification_bound(kernel, 1e-3, system.medium)
    assert b1 > 0
    assert noise_amplification_bound(kernel, 2e-3, system.medium) == pytest.approx(2 * b1)


def test_recovers_scattered_field_outside_the_surface(kernel_sphere):
    medium = build_phantom(small_config())
    bs = BackgroundSolver(medium, OMEGA)
    wave = PlaneWave.pressure([0, 0, 1], OMEGA)
    V = bs.solve_wave(wave).values
    data_sphere = kernel_sphere.mirrored()
    bank = bs.far_field(V, data_sphere)
    surface = MeasurementSurfaceK.ball(kernel_sphere, 1.5)
    points = np.array([[0.0, 0.0, 3.0], [2.5, 0.0, 0.0]])

    rec = recover_exterior_fields(bank, None, surface, points, OMEGA, medium.homogeneous(), AlphaPolicy(), wave)
    truth = bs.scattered_at(points, V)
    for i in range(points.shape[0]):
        assert np.linalg.norm(rec.Vs[i] - truth[i]) <= 0.05 * np.linalg.norm(truth[i])
    assert rec.difference is None
    np.testing.assert_allclose(rec.Vt - rec.Vs, plane_wave_field(wave, points, medium))
    assert len(rec.fits) == 2 and len(rec.fits[0]) == 3


def test_herglotz_wave_solves_navier_equation(system):
    kernel = system.fit(system.point_source_rhs([0, 0, 3.0], [[0.3, 1.0, 0.0]])[:, 0], AlphaPolicy()).kernel
    m = system.medium
    # the fitted kernel is large against Hg, so keep round-off in the second differences down
    h = 5e-3
    ax = (np.arange(3) - 1) * h
    X = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
    for y in ([0.0, 0.0, 0.0], [0.4, -0.3, 0.2], [-0.6, 0.1, 0.5]):
        Hg = herglotz_apply(kernel, X.reshape(-1, 3) + np.asarray(y), m, OMEGA).reshape(3, 3, 3, 3)
        residual = elastic_laplacian_fd(Hg, m.lam, m.mu, h)[1, 1, 1] + OMEGA ** 2 * m.rho_tilde * Hg[1, 1, 1]
        assert np.linalg.norm(residual) <= 1e-4 * np.linalg.norm(Hg[1, 1, 1])
