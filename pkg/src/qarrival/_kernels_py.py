"""Pure numpy implementation of the hot kernels.

Used when the compiled extension ``qarrival._kernels`` is not available or
when ``QARRIVAL_PURE_PYTHON=1`` is set.  Both backends expose the same two
functions with identical signatures; ``tests/test_backend.py`` checks that
they agree.
"""
import numpy as np
from scipy.special import wofz

_TWO_I_SQRTPI = 2j / np.sqrt(np.pi)


def packet_eval(x, t, alpha, delta, k0, x0, hbar, mass, cprime):
    """Unboosted analytic packet and its x-derivative.

    Returns ``(psi, dpsi_dx)`` broadcast over ``x`` and ``t``.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    a = delta * delta + 0.5j * hbar * t / mass
    b = a + alpha
    g = 1j * (x - x0) + 2.0 * k0 * delta * delta
    sa = np.sqrt(a)
    sb = np.sqrt(b)
    za = -1j * g / (2.0 * sa)
    zb = -1j * g / (2.0 * sb)
    wa = wofz(za)
    wb = wofz(zb)
    psi = cprime * (wa / sa - wb / sb)
    dwa = -2.0 * za * wa + _TWO_I_SQRTPI
    dwb = -2.0 * zb * wb + _TWO_I_SQRTPI
    dpsi = cprime * (dwa / (2.0 * a) - dwb / (2.0 * b))
    return psi, dpsi


def _layer_matrix(q, w):
    z = q * w
    c = np.cos(z)
    sn = np.sin(z)
    small = np.abs(z) < 1e-4
    # sin(qw)/q without the 0/0 at q -> 0
    s_over_q = np.where(small, w * (1.0 - z * z / 6.0 + z**4 / 120.0),
                        sn / np.where(small, 1.0, q))
    return c, s_over_q, -q * sn, sn


def _layer_matrix_dq(q, w, c, sn, s_over_q):
    z = q * w
    small = np.abs(z) < 1e-3
    d11 = -w * sn
    d12 = np.where(small, q * w**3 * (-1.0 / 3.0 + z * z / 30.0 - z**4 / 840.0),
                   (w * c - s_over_q) / np.where(small, 1.0, q))
    d21 = -sn - z * c
    return d11, d12, d21


def transfer_scatter(v, widths, p, mass, hbar, want_grad):
    """R(p), T(p) for a stack of constant complex layers starting at x=0.

    ``v`` and ``widths`` describe the (sub)layers left to right.  With
    ``want_grad`` the complex derivatives dR/dV_j and dT/dV_j per sublayer
    are returned as arrays of shape ``(len(p), len(v))``.
    """
    v = np.asarray(v, dtype=complex)
    widths = np.asarray(widths, dtype=float)
    p = np.asarray(p, dtype=float)
    n = v.size
    k = p / hbar
    e = p * p / (2.0 * mass)
    q = np.sqrt(2.0 * mass * (e[:, None] - v[None, :]) + 0j) / hbar
    c, s_over_q, m21, sn = _layer_matrix(q, widths[None, :])
    npts = p.size
    mats = np.empty((npts, n, 2, 2), dtype=complex)
    mats[..., 0, 0] = c
    mats[..., 0, 1] = s_over_q
    mats[..., 1, 0] = m21
    mats[..., 1, 1] = c

    eye = np.broadcast_to(np.eye(2, dtype=complex), (npts, 2, 2))
    prefix = [eye]
    for j in range(n):
        prefix.append(mats[:, j] @ prefix[-1])
    total = prefix[-1]
    big_l = widths.sum()

    a = 1j * k * total[:, 0, 0] - total[:, 1, 0]
    cc = -k * k * total[:, 0, 1] - 1j * k * total[:, 1, 1]
    r = -(a + cc) / (a - cc)
    phase = np.exp(-1j * k * big_l)
    # closed form; forward propagation of (1 + r) loses digits when T is tiny
    tr = phase * 2j * k / (a - cc)
    if not want_grad:
        return r, tr

    suffix = [None] * (n + 1)
    suffix[n] = eye
    for j in range(n - 1, -1, -1):
        suffix[j] = suffix[j + 1] @ mats[:, j]

    d11, d12, d21 = _layer_matrix_dq(q, widths[None, :], c, sn, s_over_q)
    dq_dv = -mass / (hbar * hbar * q)
    dr = np.empty((npts, n), dtype=complex)
    dt = np.empty((npts, n), dtype=complex)
    dmat = np.empty((npts, 2, 2), dtype=complex)
    for j in range(n):
        dmat[:, 0, 0] = d11[:, j] * dq_dv[:, j]
        dmat[:, 0, 1] = d12[:, j] * dq_dv[:, j]
        dmat[:, 1, 0] = d21[:, j] * dq_dv[:, j]
        dmat[:, 1, 1] = dmat[:, 0, 0]
        dm = suffix[j + 1] @ dmat @ prefix[j]
        da = 1j * k * dm[:, 0, 0] - dm[:, 1, 0]
        dc = -k * k * dm[:, 0, 1] - 1j * k * dm[:, 1, 1]
        drj = -((da + dc) * (a - cc) - (a + cc) * (da - dc)) / (a - cc) ** 2
        dr[:, j] = drj
        dt[:, j] = -tr * (da - dc) / (a - cc)
    return r, tr, dr, dt
