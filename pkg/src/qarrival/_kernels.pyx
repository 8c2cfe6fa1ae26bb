# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: analytic packet evaluation and layered-potential
transfer matrices.  Mirrors ``_kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp
from scipy.special.cython_special cimport wofz

cnp.import_array()

cdef extern from "complex.h" nogil:
    double complex csqrt(double complex)
    double complex ccos(double complex)
    double complex csin(double complex)
    double complex cexp(double complex)
    double cabs(double complex)

cdef double complex TWO_I_SQRTPI = 2j / 1.7724538509055160273


def packet_eval(x, t, double alpha, double delta, double k0, double x0,
                double hbar, double mass, double cprime):
    """Unboosted analytic packet and its x-derivative, broadcast over x, t."""
    xb, tb = np.broadcast_arrays(np.asarray(x, dtype=np.float64),
                                 np.asarray(t, dtype=np.float64))
    shape = xb.shape
    cdef const double[::1] xf = np.ascontiguousarray(xb).ravel()
    cdef const double[::1] tf = np.ascontiguousarray(tb).ravel()
    cdef Py_ssize_t n = xf.shape[0], i
    psi = np.empty(n, dtype=np.complex128)
    dpsi = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] po = psi
    cdef double complex[::1] do = dpsi
    cdef double complex a, b, g, sa, sb, za, zb, wa, wb
    cdef double d2 = delta * delta
    with nogil:
        for i in range(n):
            a = d2 + 0.5j * hbar * tf[i] / mass
            b = a + alpha
            g = 1j * (xf[i] - x0) + 2.0 * k0 * d2
            sa = csqrt(a)
            sb = csqrt(b)
            za = -1j * g / (2.0 * sa)
            zb = -1j * g / (2.0 * sb)
            wa = wofz(za)
            wb = wofz(zb)
            po[i] = cprime * (wa / sa - wb / sb)
            do[i] = cprime * ((-2.0 * za * wa + TWO_I_SQRTPI) / (2.0 * a)
                              - (-2.0 * zb * wb + TWO_I_SQRTPI) / (2.0 * b))
    if shape == ():
        return psi[0], dpsi[0]
    return psi.reshape(shape), dpsi.reshape(shape)


cdef inline void _layer(double complex q, double w, double complex* m) noexcept nogil:
    cdef double complex z = q * w
    cdef double complex c = ccos(z)
    cdef double complex sn = csin(z)
    m[0] = c
    if cabs(z) < 1e-4:
        m[1] = w * (1.0 - z * z / 6.0 + z * z * z * z / 120.0)
    else:
        m[1] = sn / q
    m[2] = -q * sn
    m[3] = c


cdef inline void _layer_dq(double complex q, double w, double complex* d) noexcept nogil:
    cdef double complex z = q * w
    cdef double complex c = ccos(z)
    cdef double complex sn = csin(z)
    d[0] = -w * sn
    if cabs(z) < 1e-3:
        d[1] = q * w * w * w * (-1.0 / 3.0 + z * z / 30.0 - z * z * z * z / 840.0)
    else:
        d[1] = (w * c - sn / q) / q
    d[2] = -sn - z * c
    d[3] = d[0]


cdef inline void _mul(const double complex* a, const double complex* b,
                      double complex* out) noexcept nogil:
    # out = a @ b for row-major 2x2
    cdef double complex o0 = a[0] * b[0] + a[1] * b[2]
    cdef double complex o1 = a[0] * b[1] + a[1] * b[3]
    cdef double complex o2 = a[2] * b[0] + a[3] * b[2]
    cdef double complex o3 = a[2] * b[1] + a[3] * b[3]
    out[0] = o0
    out[1] = o1
    out[2] = o2
    out[3] = o3


def transfer_scatter(v, widths, p, double mass, double hbar, bint want_grad):
    """R(p), T(p) (and dR/dV_j, dT/dV_j) for a stack of complex layers."""
    cdef const double complex[::1] vv = np.ascontiguousarray(v, dtype=np.complex128)
    cdef const double[::1] ww = np.ascontiguousarray(widths, dtype=np.float64)
    cdef const double[::1] pp = np.ascontiguousarray(p, dtype=np.float64).ravel()
    cdef Py_ssize_t nl = vv.shape[0], npts = pp.shape[0], i, j
    r_out = np.empty(npts, dtype=np.complex128)
    t_out = np.empty(npts, dtype=np.complex128)
    cdef double complex[::1] ro = r_out
    cdef double complex[::1] to = t_out
    dr_out = np.empty((npts, nl if want_grad else 0), dtype=np.complex128)
    dt_out = np.empty((npts, nl if want_grad else 0), dtype=np.complex128)
    cdef double complex[:, ::1] dro = dr_out
    cdef double complex[:, ::1] dto = dt_out
    pre_arr = np.empty((nl + 1, 4), dtype=np.complex128)
    suf_arr = np.empty((nl + 1, 4), dtype=np.complex128)
    mat_arr = np.empty((nl, 4), dtype=np.complex128)
    q_arr = np.empty(nl, dtype=np.complex128)
    cdef double complex[:, ::1] pre = pre_arr
    cdef double complex[:, ::1] suf = suf_arr
    cdef double complex[:, ::1] mats = mat_arr
    cdef double complex[::1] qs = q_arr
    cdef double big_l = 0.0
    cdef double k, e
    cdef double complex a, cc, r, tr, phase, da, dc, drj, dqdv
    cdef double complex dm[4]
    cdef double complex tmp[4]
    for j in range(nl):
        big_l += ww[j]
    with nogil:
        for i in range(npts):
            k = pp[i] / hbar
            e = pp[i] * pp[i] / (2.0 * mass)
            pre[0, 0] = 1.0
            pre[0, 1] = 0.0
            pre[0, 2] = 0.0
            pre[0, 3] = 1.0
            for j in range(nl):
                qs[j] = csqrt(2.0 * mass * (e - vv[j]) + 0j) / hbar
                _layer(qs[j], ww[j], &mats[j, 0])
                _mul(&mats[j, 0], &pre[j, 0], &pre[j + 1, 0])
            a = 1j * k * pre[nl, 0] - pre[nl, 2]
            cc = -k * k * pre[nl, 1] - 1j * k * pre[nl, 3]
            r = -(a + cc) / (a - cc)
            phase = cexp(-1j * k * big_l)
            # closed form; forward propagation of (1 + r) loses digits when T is tiny
            tr = phase * 2j * k / (a - cc)
            ro[i] = r
            to[i] = tr
            if not want_grad:
                continue
            suf[nl, 0] = 1.0
            suf[nl, 1] = 0.0
            suf[nl, 2] = 0.0
            suf[nl, 3] = 1.0
            for j in range(nl - 1, -1, -1):
                _mul(&suf[j + 1, 0], &mats[j, 0], &suf[j, 0])
            for j in range(nl):
                _layer_dq(qs[j], ww[j], dm)
                dqdv = -mass / (hbar * hbar * qs[j])
                dm[0] = dm[0] * dqdv
                dm[1] = dm[1] * dqdv
                dm[2] = dm[2] * dqdv
                dm[3] = dm[3] * dqdv
                _mul(dm, &pre[j, 0], tmp)
                _mul(&suf[j + 1, 0], tmp, dm)
                da = 1j * k * dm[0] - dm[2]
                dc = -k * k * dm[1] - 1j * k * dm[3]
                drj = -((da + dc) * (a - cc) - (a + cc) * (da - dc)) / ((a - cc) * (a - cc))
                dro[i, j] = drj
                dto[i, j] = -tr * (da - dc) / (a - cc)
    if want_grad:
        return r_out, t_out, dr_out, dt_out
    return r_out, t_out
