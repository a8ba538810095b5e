import itertools

import numpy as np
import pytest
from scipy import integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from elastic_imaging.domain.errors import InvalidMediumError, SingularityError
from elastic_imaging.domain.medium import ElasticMedium, PlaneWave
from elastic_imaging.services.kernels.assembly import point_cell_kernel, volume_operator
from elastic_imaging.services.inversion.steps import elastic_laplacian_fd
from elastic_imaging.services.kernels.elastic import (
    farfield_pattern,
    kelvin_matrix,
    kelvin_self_block,
    kelvin_tensor,
    kupradze_matrix,
    kupradze_self_remainder,
    kupradze_series,
    kupradze_tensor,
    mirrored_wave,
    plane_wave_field,
    wavenumbers,
)

coords = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)
vec3 = st.tuples(coords, coords, coords).map(np.array)


def test_wavenumbers_follow_lame_constants(homogeneous):
    wn = wavenumbers(homogeneous, 2.0)
    assert wn.c_s == pytest.approx(1.0)
    assert wn.c_p == pytest.approx(np.sqrt(3.0))
    assert wn.kappa_s == pytest.approx(2.0)
    assert wn.kappa_p == pytest.approx(2.0 / np.sqrt(3.0))


def test_invalid_lame_constants_rejected():
    with pytest.raises(InvalidMediumError, match="μ > 0"):
        ElasticMedium(lam=1.0, mu=-1.0, rho_tilde=1.0)
    with pytest.raises(InvalidMediumError, match="3λ \\+ 2μ"):
        ElasticMedium(lam=-1.0, mu=1.0, rho_tilde=1.0)


def test_closed_form_matches_series(homogeneous):
    omega = 1.0
    for kr in (0.02, 0.1, 0.3, 0.5):
        x = np.array([1.0, 2.0, -0.5])
        x *= kr / np.linalg.norm(x)
        closed = kupradze_matrix(x, np.zeros(3), omega, homogeneous)
        series = kupradze_series(x, np.zeros(3), omega, homogeneous, n_terms=30)
        assert np.linalg.norm(closed - series) <= 1e-8 * np.linalg.norm(series)


def test_series_with_one_term_is_kelvin(homogeneous):
    x = np.array([0.3, -0.1, 0.2])
    np.testing.assert_allclose(
        kupradze_series(x, np.zeros(3), 0.7, homogeneous, n_terms=1),
        kelvin_matrix(x, np.zeros(3), homogeneous),
        rtol=1e-13,
    )


def test_kupradze_tends_to_kelvin(homogeneous):
    r = np.array([0.3, -0.2, 0.4])
    omegas = np.array([1e-1, 1e-2, 1e-3])
    err = [np.linalg.norm(kupradze_tensor(r, w, homogeneous) - kelvin_tensor(r, homogeneous)) for w in omegas]
    slope = np.polyfit(np.log(omegas), np.log(err), 1)[0]
    assert slope >= 0.9


def test_self_remainder_is_small_distance_limit(homogeneous):
    omega = 1.5
    r = np.array([1e-6, 0.0, 0.0])
    diff = kupradze_tensor(r, omega, homogeneous) - kelvin_tensor(r, homogeneous)
    np.testing.assert_allclose(diff, kupradze_self_remainder(omega, homogeneous), atol=1e-6)


def test_coincident_points_raise(homogeneous):
    with pytest.raises(SingularityError):
        kupradze_matrix(np.ones(3), np.ones(3), 1.0, homogeneous)
    with pytest.raises(SingularityError):
        kelvin_matrix(np.zeros(3), np.zeros(3), homogeneous)


@settings(max_examples=40, deadline=None)
@given(x=vec3, y=vec3)
def test_kelvin_symmetric_and_homogeneous(x, y):
    d = x - y
    if np.linalg.norm(d) < 1e-3:
        return
    medium = ElasticMedium(lam=2.0, mu=0.7, rho_tilde=1.3)
    G = kelvin_matrix(x, y, medium)
    np.testing.assert_allclose(G, G.T, rtol=0, atol=1e-12 * np.abs(G).max())
    np.testing.assert_allclose(G, kelvin_matrix(y, x, medium), rtol=1e-12)
    np.testing.assert_allclose(kelvin_tensor(3.0 * d, medium) * 3.0, G, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(x=vec3, y=vec3)
def test_kupradze_symmetric(x, y):
    if np.linalg.norm(x - y) < 1e-3:
        return
    medium = ElasticMedium(lam=1.0, mu=1.0, rho_tilde=1.0)
    G = kupradze_matrix(x, y, 1.3, medium)
    np.testing.assert_allclose(G, G.T, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(G, kupradze_matrix(y, x, 1.3, medium), rtol=1e-12)


def test_farfield_pattern_matches_decay(homogeneous):
    omega = 2.0
    xhat = np.array([0.0, 0.6, 0.8])
    y = np.array([0.1, -0.2, 0.05])
    R = 4000.0
    G = kupradze_matrix(R * xhat, y, omega, homogeneous)
    p, s = farfield_pattern(xhat, y, omega, homogeneous)
    wn = wavenumbers(homogeneous, omega)
    approx = p * np.exp(1j * wn.kappa_p * R) / R + s * np.exp(1j * wn.kappa_s * R) / R
    assert np.linalg.norm(G - approx) <= 1e-2 * np.linalg.norm(approx)


def test_plane_wave_is_vectorised(homogeneous):
    wave = PlaneWave(theta=[0, 0, 1], theta_perp=[1, 0, 0], beta1=1.0, beta2=0.5, omega=1.0)
    pts = np.random.default_rng(0).standard_normal((4, 5, 3))
    field = plane_wave_field(wave, pts, homogeneous)
    assert field.shape == (4, 5, 3)
    np.testing.assert_allclose(field[1, 2], plane_wave_field(wave, pts[1, 2], homogeneous))


def test_mirrored_wave_reverses_direction():
    w = mirrored_wave([0, 0, 1], [1, 0, 0], 1.0, 2.0, omega=1.5)
    np.testing.assert_allclose(w.theta, [0, 0, -1])
    assert w.beta1 == -1.0
    assert w.beta2 == 2.0


def test_volume_operator_is_complex_symmetric(homogeneous):
    pts = np.array([[0, 0, 0], [0.2, 0, 0], [0, 0.2, 0], [0.2, 0.2, 0.2]], dtype=float)
    T = volume_operator(pts, 0.008, 1.0, homogeneous)
    np.testing.assert_allclose(T, T.T, rtol=1e-12, atol=1e-15)
    N = volume_operator(pts, 0.008, 0.0, homogeneous)
    assert N.dtype == float


def test_point_cell_kernel_uses_cell_average_inside_host(homogeneous):
    centers = np.array([[0, 0, 0], [0.2, 0, 0]], dtype=float)
    target = np.array([[0.01, 0.0, 0.0]])
    K = point_cell_kernel(target, centers, 0.008, 1.0, homogeneous, host=np.array([0]))
    T = volume_operator(centers, 0.008, 1.0, homogeneous)
    np.testing.assert_allclose(K[0, 0] * 0.008, T[:3, :3])


def _kelvin_cube_integral(h: float, medium: ElasticMedium) -> np.ndarray:
    """
    Integral of the Kelvin tensor over the cube of side h centred at the
    singularity. On the pyramid where x is the largest coordinate put
    y = x u, z = x v; the 1/r singularity cancels against the Jacobian x^2.
    The 48 symmetric pyramids follow by permuting and flipping axes.
    """
    def entry(i, j):
        def f(v, u):
            s = np.array([1.0, u, v])
            r = np.linalg.norm(s)
            return (medium.gamma1 * (i == j) + medium.gamma2 * s[i] * s[j] / r ** 2) / (4.0 * np.pi * r)
        return integrate.dblquad(f, 0.0, 1.0, 0.0, 1.0, epsabs=1e-12, epsrel=1e-10)[0]

    M = np.array([[entry(i, j) for j in range(3)] for i in range(3)])
    total = np.zeros((3, 3))
    for perm in ({0: 0, 1: 1, 2: 2}, {0: 1, 1: 2, 2: 0}, {0: 2, 1: 0, 2: 1}):
        P = np.zeros((3, 3))
        for k, v in perm.items():
            P[v, k] = 1.0
        for signs in itertools.product((1.0, -1.0), repeat=3):
            D = np.diag(signs)
            total += D @ P @ M @ P.T @ D
    return total * (0.5 * h) ** 2 / 2.0


def test_kelvin_self_block_matches_cube_quadrature(homogeneous):
    h = 0.1
    oracle = _kelvin_cube_integral(h, homogeneous)
    np.testing.assert_allclose(oracle, oracle[0, 0] * np.eye(3), atol=1e-10 * oracle[0, 0])
    block = kelvin_self_block(h ** 3, homogeneous)
    assert np.linalg.norm(block - oracle) <= 0.05 * np.linalg.norm(oracle)


@pytest.mark.parametrize("beta1, beta2", [(1.0, 0.0), (0.0, 1.0), (0.7, -0.4 + 0.2j)])
def test_plane_wave_solves_navier_equation(beta1, beta2):
    medium = ElasticMedium(lam=2.0, mu=1.0, rho_tilde=1.3)
    omega = 1.7
    theta = np.array([2.0, 1.0, 2.0]) / 3.0
    theta_perp = np.array([1.0, 0.0, -1.0]) / np.sqrt(2.0)
    wave = PlaneWave(theta=theta, theta_perp=theta_perp, beta1=beta1, beta2=beta2, omega=omega)
    h = 1e-3
    ax = (np.arange(3) - 1) * h
    X = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
    for x0 in np.random.default_rng(11).uniform(-2.0, 2.0, size=(4, 3)):
        U = plane_wave_field(wave, X + x0, medium)
        residual = elastic_laplacian_fd(U, medium.lam, medium.mu, h)[1, 1, 1] + omega ** 2 * medium.rho_tilde * U[1, 1, 1]
        assert np.linalg.norm(residual) <= 1e-4 * np.linalg.norm(U[1, 1, 1])
