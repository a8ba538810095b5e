import numpy as np
import pytest

from elastic_imaging.domain.config import DomainConfig, PhantomConfig
from elastic_imaging.domain.enums import PhantomKind
from elastic_imaging.domain.errors import SourceInsideDomainError
from elastic_imaging.domain.inclusion import Inclusion
from elastic_imaging.domain.medium import PlaneWave
from elastic_imaging.services.forward.far_field import far_field_from_sources, gauss_sphere
from elastic_imaging.services.forward.lippmann_schwinger import (
    BackgroundSolver,
    background_green,
    inclusion_far_field,
    solve_background,
    solve_with_inclusion,
)
from elastic_imaging.services.kernels.elastic import plane_wave_field
from elastic_imaging.services.scenario.phantom import build_phantom
from elastic_imaging.services.spectrum.newtonian import build_resonance
from elastic_imaging.services.spectrum.shapes import reference_ball
from tests.scenarios import small_config

OMEGA = 2.0


@pytest.fixture(scope="module")
def phantom():
    return build_phantom(small_config())


@pytest.fixture(scope="module")
def solver(phantom):
    return BackgroundSolver(phantom, OMEGA)


def test_homogeneous_background_returns_incident(phantom):
    flat = phantom.with_density(np.full(phantom.grid.n_cells, phantom.rho_tilde))
    bs = BackgroundSolver(flat, OMEGA)
    wave = PlaneWave.pressure([0, 0, 1], OMEGA)
    u = bs.solve_wave(wave)
    np.testing.assert_allclose(u.values, plane_wave_field(wave, bs.centers, flat))
    p, s = bs.far_field_at(gauss_sphere(3).nodes, u.values)
    assert np.all(p == 0) and np.all(s == 0)


def test_solution_satisfies_the_volume_equation(solver, phantom):
    wave = PlaneWave.pressure(np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0), OMEGA)
    u = solver.solve_wave(wave).values.reshape(-1)
    rhs = plane_wave_field(wave, solver.centers, phantom).reshape(-1)
    assert np.linalg.norm(solver.A @ u - rhs) <= 1e-10 * np.linalg.norm(rhs)
    # the contrast actually scatters
    assert np.linalg.norm(u - rhs) > 1e-4 * np.linalg.norm(rhs)


def test_batched_waves_match_single_solves(solver):
    waves = [PlaneWave.pressure([0, 0, 1], OMEGA), PlaneWave.shear([0, 0, 1], [1, 0, 0], OMEGA)]
    batch = solver.solve_waves(waves)
    for k, w in enumerate(waves):
        np.testing.assert_allclose(batch[k], solver.solve_wave(w).values, rtol=1e-10, atol=1e-14)


def test_far_field_reciprocity(solver):
    theta = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)
    yhat = np.array([0.0, 0.6, 0.8])
    u1 = solver.solve_wave(PlaneWave.pressure(theta, OMEGA)).values
    u2 = solver.solve_wave(PlaneWave.pressure(-yhat, OMEGA)).values
    p1, _ = solver.far_field_at(yhat[None, :], u1)
    p2, _ = solver.far_field_at(-theta[None, :], u2)
    lhs = yhat @ p1[0]
    rhs = -(theta @ p2[0])
    assert abs(lhs - rhs) <= 1e-6 * abs(lhs)


def test_mixed_reciprocity_at_exterior_point(solver, phantom):
    yhat = np.array([0.0, 0.6, 0.8])
    x = np.array([2.5, 0.0, 0.0])
    q = np.array([0.3, -0.5, 0.8])
    wave = PlaneWave.pressure(-yhat, OMEGA, beta=-1.0)
    g = solver.green_fields(x, [q])[0]
    ps, _ = solver.far_field_at(yhat[None, :], g)
    pi, _ = far_field_from_sources(yhat[None, :], x[None, :], q[None, :], OMEGA, phantom)
    lhs = 4.0 * np.pi * phantom.p_modulus * (yhat @ (ps[0] + pi[0]))
    u = solver.solve_wave(wave).values
    rhs = q @ (plane_wave_field(wave, x, phantom) + solver.scattered_at(x, u)[0])
    assert abs(lhs - rhs) <= 1e-6 * abs(rhs)


def test_point_source_inside_domain_rejected(phantom, solver):
    with pytest.raises(SourceInsideDomainError):
        background_green(phantom, None, [0.1, 0.0, 0.0], [1, 0, 0], OMEGA, solver=solver)
    col = background_green(phantom, None, [0.0, 0.0, 3.0], [1, 0, 0], OMEGA, solver=solver)
    assert col.values.shape == (phantom.grid.n_cells, 3)


def test_solver_rejects_zero_frequency(phantom):
    with pytest.raises(ValueError):
        BackgroundSolver(phantom, 0.0)


def test_inclusion_solve_converges(solver, phantom):
    inclusion = Inclusion(z=[0.0, 0.0, 0.0], a=0.05, c1=2.0, gridB=reference_ball(3))
    wave = PlaneWave.pressure([0, 0, 1], OMEGA)
    sol = solve_with_inclusion(phantom, wave, None, inclusion, solver=solver)
    assert sol.residual <= 1e-8
    # D carries rho1 on top of the host density
    np.testing.assert_allclose(sol.alpha_d, inclusion.rho1 - phantom.rho_field[solver.host_of([[0, 0, 0]])[0]])
    ff = inclusion_far_field(solver, sol, gauss_sphere(4))
    assert np.isfinite(ff.l2_norm())


def test_inclusion_must_fit_inside_domain(solver, phantom):
    inclusion = Inclusion(z=[0.0, 0.0, 0.97], a=0.05, c1=2.0, gridB=reference_ball(3))
    with pytest.raises(ValueError, match="inside"):
        solve_with_inclusion(phantom, PlaneWave.pressure([0, 0, 1], OMEGA), None, inclusion, solver=solver)


def test_solver_frequency_must_match_wave(solver, phantom):
    inclusion = Inclusion(z=[0.0, 0.0, 0.0], a=0.05, c1=2.0, gridB=reference_ball(3))
    with pytest.raises(ValueError, match="frequency"):
        solve_with_inclusion(phantom, PlaneWave.pressure([0, 0, 1], 1.0), None, inclusion, solver=solver)


def test_solve_background_matches_factored_solver(solver, phantom):
    wave = PlaneWave.shear([1, 0, 0], [0, 0, 1], OMEGA, beta=0.5j)
    u = solve_background(phantom, wave)
    np.testing.assert_allclose(u.values, solver.solve_wave(wave).values, rtol=1e-12, atol=1e-14)


def test_inclusion_field_grows_as_detuning_shrinks(eig_small):
    host = build_phantom(small_config(phantom=PhantomConfig(), domain=DomainConfig(resolution=5)))
    gridB = eig_small.grid
    norms = []
    for b in (4.0, 2.0, 1.0, 0.5):
        res = build_resonance(eig_small, a=0.01, c1=20.0, h=0.5, b=b, sign=-1)
        wave = PlaneWave.pressure([1, 0, 0], res.omega_inc)
        inclusion = Inclusion(z=[0.0, 0.0, 0.0], a=0.01, c1=20.0, gridB=gridB)
        sol = solve_with_inclusion(host, wave, None, inclusion)
        vol = sol.d_field.grid.cell_volume
        norms.append(float(np.sqrt(np.sum(np.abs(sol.d_field.values) ** 2) * vol)))
    assert all(later > earlier for earlier, later in zip(norms, norms[1:])), norms
    assert norms[-1] > 2.0 * norms[0]


@pytest.mark.slow
def test_background_far_field_converges_under_grid_doubling():
    # a slightly wider bump stays resolved on the coarse grid
    config = small_config(phantom=PhantomConfig(kind=PhantomKind.GAUSSIAN, amplitude=1.0, width=0.21))
    sphere = gauss_sphere(4)
    wave = PlaneWave.pressure(np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0), OMEGA)
    patterns = []
    for resolution in (8, 16):
        medium = build_phantom(config.model_copy(update={"domain": DomainConfig(resolution=resolution)}))
        bs = BackgroundSolver(medium, OMEGA)
        ff = bs.far_field(bs.solve_wave(wave).values, sphere)
        patterns.append(np.concatenate([ff.p_values.reshape(-1), ff.s_values.reshape(-1)]))
    coarse, fine = patterns
    assert np.linalg.norm(coarse - fine) <= 0.05 * np.linalg.norm(fine)
