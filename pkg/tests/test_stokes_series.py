"""The small-amplitude oracle against classical deep-water Stokes results."""
import numpy as np
import pytest

from stokesdn.stokes_series import stokes_series


@pytest.fixture(scope="module")
def s1():
    return stokes_series(1, 1.0, 5)


def test_leading_order(s1):
    assert s1.c[0] == 1.0
    assert s1.eta_cos[1, 1] == pytest.approx(1.0, abs=1e-15)
    assert s1.psi_sin[1, 1] == pytest.approx(1.0, abs=1e-15)


def test_classical_second_and_third_order(s1):
    # c = 1 + eps^2/2, second harmonic eps^2/2, third harmonic 3 eps^3/8
    assert s1.c[1] == pytest.approx(0.0, abs=1e-14)
    assert s1.c[2] == pytest.approx(0.5, abs=1e-13)
    assert s1.eta_cos[2, 2] == pytest.approx(0.5, abs=1e-13)
    assert s1.eta_cos[3, 3] == pytest.approx(0.375, abs=1e-13)


def test_odd_even_structure(s1):
    # Harmonic j only appears at orders n >= j with n - j even; c is even in eps.
    for n in range(s1.order + 1):
        for j in range(s1.eta_cos.shape[1]):
            if j > n or (n - j) % 2:
                assert abs(s1.eta_cos[n, j]) < 1e-13
                assert abs(s1.psi_sin[n, j]) < 1e-13
    assert np.all(np.abs(s1.c[1::2]) < 1e-13)


def test_amplitude_constraint_holds(s1):
    for n in range(2, s1.order + 1):
        assert abs(s1.eta_cos[n, 1] + s1.psi_sin[n, 1]) < 1e-13


def test_mean_defect(s1):
    assert s1.mean_defect < 1e-13


@pytest.mark.parametrize("k,g", [(2, 1.0), (1, 2.5), (3, 0.5)])
def test_speed_scaling(k, g):
    # steepness k a = k^{3/2} eps, so c = sqrt(g/k) (1 + k^3 eps^2 / 2) at second order
    s = stokes_series(k, g, 3)
    c0 = np.sqrt(g / k)
    assert s.c[0] == pytest.approx(c0, rel=1e-15)
    assert s.c[2] == pytest.approx(c0 * k**3 / 2, rel=1e-12)
    assert s.eta_cos[2, 2 * k] == pytest.approx(k**2 / 2, rel=1e-12)


def test_speed_polynomial(s1):
    assert s1.speed(0.1) == pytest.approx(np.polyval(s1.c[::-1], 0.1), rel=1e-15)


def test_bad_arguments():
    with pytest.raises(ValueError):
        stokes_series(0)
    with pytest.raises(ValueError):
        stokes_series(1, -1.0)
