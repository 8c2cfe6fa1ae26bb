"""Independent reference values computed with mpmath.

These evaluate the defining integrals directly (momentum-space Fourier
synthesis, scattering by matching plane waves) without touching the
package's closed forms, quadrature rules or kernels.
"""
import mpmath as mp

DPS = 20


def momentum_density_unnormalized(q, alpha, delta, p0):
    return (1 - mp.exp(-alpha * q * q)) ** 2 * mp.exp(-2 * delta**2 * (q - p0) ** 2)


def norm_constant(alpha, delta, p0):
    with mp.workdps(DPS):
        f = lambda q: momentum_density_unnormalized(q, alpha, delta, p0)  # noqa: E731
        total = mp.quad(f, [0, 1, 10, p0, p0 + 400, p0 + 1000, mp.inf])
        return 1 / mp.sqrt(total)


def _segments(lo, hi, x, t, max_phase=3.0):
    """Breakpoints so that the Fourier phase changes by at most max_phase per piece."""
    pts = [lo]
    while pts[-1] < hi:
        p = pts[-1]
        slope = abs(x) + p * t + 1e-30
        pts.append(min(hi, p + max(max_phase / slope, 1e-3)))
    return pts


def amplitude(x, t, alpha, delta, p0, x0, b=0.0, with_gradient=False, q_hi=900.0):
    """psi(x, t) = (2 pi)^-1/2 int_b^inf C phi(p - b) exp(i p x - i p^2 t / 2) dp (hbar = m = 1)."""
    with mp.workdps(DPS):
        c = norm_constant(alpha, delta, p0)
        x, t, b = mp.mpf(x), mp.mpf(t), mp.mpf(b)

        def phi(q):
            return c * (1 - mp.exp(-alpha * q * q)) * mp.exp(-delta**2 * (q - p0) ** 2
                                                            - 1j * q * x0)

        def f(q, k):
            p = q + b
            return phi(q) * (1j * p) ** k * mp.exp(1j * p * x - 0.5j * p * p * t)

        # the phase slope in q is x - (q + b) t
        segs = _segments(0, q_hi + p0, abs(x) + float(b) * float(t), t)
        val = mp.quad(lambda q: f(q, 0), segs) / mp.sqrt(2 * mp.pi)
        if not with_gradient:
            return val
        der = mp.quad(lambda q: f(q, 1), segs) / mp.sqrt(2 * mp.pi)
        return val, der


def flux(x, t, alpha, delta, p0, x0, b=0.0):
    psi, dpsi = amplitude(x, t, alpha, delta, p0, x0, b, with_gradient=True)
    return mp.im(mp.conj(psi) * dpsi)


def barrier_amplitudes(p, v, length):
    """R, T for a single constant complex barrier on [0, length] by direct matching."""
    with mp.workdps(DPS):
        p = mp.mpf(p)
        k = p
        q = mp.sqrt(p * p - 2 * mp.mpc(v))
        # unknowns r, a, bb, tt: continuity of psi and psi' at 0 and length
        e_p, e_m = mp.exp(1j * q * length), mp.exp(-1j * q * length)
        e_k = mp.exp(1j * k * length)
        m = mp.matrix([[-1, 1, 1, 0],
                       [1j * k, 1j * q, -1j * q, 0],
                       [0, e_p, e_m, -e_k],
                       [0, 1j * q * e_p, -1j * q * e_m, -1j * k * e_k]])
        rhs = mp.matrix([1, 1j * k, 0, 0])
        sol = mp.lu_solve(m, rhs)
        return complex(sol[0]), complex(sol[3])


def kijowski(t, alpha, delta, p0, x0, b=0.0, q_hi=900.0):
    """|(2 pi)^-1/2 int sqrt(p) exp(-i p^2 t / 2) <p|psi> dp|^2 at x = 0."""
    with mp.workdps(DPS):
        c = norm_constant(alpha, delta, p0)
        t, b = mp.mpf(t), mp.mpf(b)

        def f(q):
            p = q + b
            phi = c * (1 - mp.exp(-alpha * q * q)) * mp.exp(-delta**2 * (q - p0) ** 2
                                                           - 1j * q * x0)
            return mp.sqrt(p) * phi * mp.exp(-0.5j * p * p * t)

        segs = _segments(0, q_hi + p0, float(b) * float(t), t)
        return abs(mp.quad(f, segs)) ** 2 / (2 * mp.pi)
