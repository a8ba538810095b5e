import numpy as np
import pytest

from elastic_imaging.domain.enums import SphereRule
from elastic_imaging.services.forward.far_field import fibonacci_sphere, gauss_sphere, sphere_grid


def test_gauss_rule_is_exact_for_low_degree():
    s = gauss_sphere(6)
    assert s.size == 72
    x, y, z = s.nodes.T
    w = s.weights
    assert np.sum(w * z ** 2) == pytest.approx(4 * np.pi / 3, rel=1e-12)
    assert np.sum(w * x ** 2 * y ** 2) == pytest.approx(4 * np.pi / 15, rel=1e-12)
    assert abs(np.sum(w * x * z)) < 1e-13


def test_fibonacci_rule_has_equal_weights():
    s = fibonacci_sphere(256)
    assert np.allclose(s.weights, 4 * np.pi / 256)
    assert np.sum(s.weights * s.nodes[:, 2] ** 2) == pytest.approx(4 * np.pi / 3, rel=1e-3)


def test_sphere_grid_dispatch():
    assert sphere_grid(SphereRule.GAUSS, n_theta=3).size == 18
    assert sphere_grid(SphereRule.FIBONACCI, n_points=50).rule == SphereRule.FIBONACCI


def test_mirrored_grid_flips_nodes():
    s = gauss_sphere(3)
    np.testing.assert_array_equal(s.mirrored().nodes, -s.nodes)
    with pytest.raises(ValueError):
        gauss_sphere(0)
