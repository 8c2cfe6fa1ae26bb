import mpmath as mp
import numpy as np
import pytest

from qarrival.specfun import FaddeevaOverflowError, faddeeva_w, faddeeva_w_prime
from qarrival.validation import faddeeva_reference


def mp_w(z):
    with mp.workdps(40):
        z = mp.mpc(z)
        return complex(mp.exp(-z * z) * mp.erfc(-1j * z))


def test_shipped_grid_relative_accuracy():
    z, ref = faddeeva_reference()
    assert z.size > 400
    err = np.abs(faddeeva_w(z) - ref) / np.abs(ref)
    assert err.max() <= 1e-12


@pytest.mark.parametrize("z", [0.3 + 0.2j, -2.5 + 0.01j, 7.0 + 3.0j, 1e-9 + 1e-9j, 0.5 - 0.5j])
def test_against_mpmath_live(z):
    assert abs(faddeeva_w(z) - mp_w(z)) <= 1e-13 * abs(mp_w(z))


def test_special_values_and_symmetry():
    assert faddeeva_w(0.0) == pytest.approx(1.0, abs=1e-15)
    z = np.array([0.4 + 1.1j, 3.0 + 0.2j, -1.0 + 2.0j])
    np.testing.assert_allclose(faddeeva_w(-np.conj(z)), np.conj(faddeeva_w(z)), rtol=1e-14)
    # w(-z) = 2 exp(-z^2) - w(z)
    np.testing.assert_allclose(faddeeva_w(-z), 2 * np.exp(-z * z) - faddeeva_w(z), rtol=1e-13)


def test_derivative_against_mpmath_difference():
    for z in (0.7 + 0.3j, 2.0 + 1.5j, -0.2 + 0.05j):
        with mp.workdps(30):
            ref = complex(mp.diff(lambda u: mp.exp(-u * u) * mp.erfc(-1j * u), mp.mpc(z)))
        assert abs(faddeeva_w_prime(z) - ref) <= 1e-13 * abs(ref)


def test_scalar_in_scalar_out():
    assert isinstance(faddeeva_w(1.0 + 1.0j), complex)
    assert faddeeva_w(np.array([1.0 + 1.0j])).shape == (1,)


def test_overflow_raises():
    with pytest.raises(FaddeevaOverflowError):
        faddeeva_w(1.0 - 40.0j)


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        faddeeva_w(complex(np.nan, 0.0))
