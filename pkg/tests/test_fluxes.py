import numpy as np
import pytest
from hypothesis import given, strategies as st

from transport_collapse.fluxes import HomogeneousFlux, InhomogeneousFlux


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=5))
def test_homogeneous_speed_is_flux_derivative(coef):
    flux = HomogeneousFlux.polynomial(coef)
    xi = np.linspace(-1, 1, 41)
    h = 1e-5
    fd = (flux.flux(xi + h) - flux.flux(xi - h)) / (2 * h)
    assert np.abs(fd - flux.speed(xi)).max() <= 1e-6 * (1 + np.abs(coef).sum())


def test_burgers_lipschitz_data():
    sup_a, lip = HomogeneousFlux.burgers().lipschitz_data(1.0)
    assert sup_a == pytest.approx(1.0)
    assert lip == pytest.approx(1.0)


def test_linear_flux_speed_is_constant():
    flux = HomogeneousFlux.linear([2.0, -1.0])
    np.testing.assert_allclose(flux.speed([0.3, -0.7]), [[2, 2], [-1, -1]])


@pytest.mark.parametrize("dimension", [1, 2])
def test_sine_speed_derivatives_and_zero_source(dimension):
    flux = InhomogeneousFlux.sine_speed(dimension=dimension)
    rng = np.random.default_rng(1)
    x = rng.uniform(-4, 4, (dimension, 50))
    xi = rng.uniform(-1.5, 1.5, 50)
    a_err, b_err, b0 = flux.check_derivatives(x, xi)
    assert a_err <= 1e-8 and b_err <= 1e-8
    assert b0 <= 1e-10


def test_characteristic_field_matches_separate_evaluators():
    flux = InhomogeneousFlux.sine_speed(dimension=2)
    rng = np.random.default_rng(2)
    x = rng.uniform(-4, 4, (2, 30))
    xi = rng.uniform(-1, 1, 30)
    a, b = flux.characteristic_field(x, xi)
    np.testing.assert_allclose(a, flux.speed(x, xi), rtol=1e-14)
    np.testing.assert_allclose(b, flux.source(x, xi), rtol=1e-14)


def test_homogeneous_flux_as_inhomogeneous_has_no_source():
    flux = HomogeneousFlux.burgers().as_inhomogeneous()
    x = np.linspace(0, 1, 5)[None]
    xi = np.linspace(-1, 1, 5)
    assert np.all(flux.source(x, xi) == 0.0)
    np.testing.assert_allclose(flux.speed(x, xi)[0], xi)
