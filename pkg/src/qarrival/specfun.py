"""Faddeeva function w(z) = exp(-z**2) erfc(-i z) and its derivative.

Evaluation is delegated to ``scipy.special.wofz`` (the Faddeeva package
algorithms).  This module adds the derivative and turns silent overflow in
the deep lower half-plane into an exception.
"""
import numpy as np
from scipy.special import wofz

TWO_OVER_SQRTPI = 2.0 / np.sqrt(np.pi)


class FaddeevaOverflowError(OverflowError):
    """exp(-z**2) is not representable, so w(z) cannot be returned."""


def _check(z, w):
    bad = ~np.isfinite(w)
    if np.any(bad):
        zb = np.asarray(z)[bad] if np.ndim(z) else z
        raise FaddeevaOverflowError(f"w(z) overflows for z = {np.ravel(zb)[0]!r}")
    return w


def faddeeva_w(z):
    """Faddeeva function for scalar or array complex ``z``.

    Raises FaddeevaOverflowError when the result is not finite, which happens
    for Im z << 0 where exp(-z**2) leaves the double range.
    """
    z_arr = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z_arr)):
        raise ValueError("z must be finite")
    with np.errstate(over="ignore", invalid="ignore"):
        w = wofz(z_arr)
    _check(z_arr, w)
    return complex(w) if w.ndim == 0 else w


def faddeeva_w_prime(z):
    """dw/dz = -2 z w(z) + 2i/sqrt(pi)."""
    z_arr = np.asarray(z, dtype=complex)
    w = faddeeva_w(z_arr)
    d = -2.0 * z_arr * w + 1j * TWO_OVER_SQRTPI
    return complex(d) if np.ndim(d) == 0 else d
