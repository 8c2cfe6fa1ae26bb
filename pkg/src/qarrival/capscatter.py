"""Scattering off a layered complex potential and packet evolution under it.

The potential is a stack of N equal-width layers with constant complex
energies V_j on [0, L].  Inside a layer the wave function is propagated as
the pair (psi, psi') with

    M = [[cos(q w), sin(q w)/q], [-q sin(q w), cos(q w)]],   q = sqrt(2m(E - V))/hbar,

which is even in q, so the branch of the square root never matters.  For a
plane wave incident from the left, psi = e^{ikx} + R e^{-ikx} for x <= 0 and
psi = T e^{ikx} for x >= L.

Packets evolve through the expansion in scattering eigenstates

    psi(x, t) = int dp <p|psi'(0)> e^{-i p^2 t/(2 m hbar)} u_p(x)/sqrt(2 pi hbar)

which, at x <= 0, coincides with the free packet plus a reflected wave.
"""
from __future__ import annotations

import functools
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import kernels
from .quadrature import (MomentumQuadrature, NonConvergenceError, TimeIntegral,
                         converge_by_doubling, gl_panels, integrate_time_axis,
                         packet_quadrature)
from .wavepacket import ATOMIC, PacketParams, Units, get_packet

logger = logging.getLogger(__name__)

#: layers with |Im q| * width above this are split before propagation
SPLIT_THRESHOLD = 30.0


class OverlapWarning(UserWarning):
    """The initial packet overlaps the absorber more than the tolerance."""


class TailBoundError(RuntimeError):
    """A truncated spatial or temporal tail exceeds the allowed size."""


class MethodDisagreementError(RuntimeError):
    """Two independent routes to the same quantity disagree."""


# ---------------------------------------------------------------- potential


@dataclass(frozen=True)
class LayeredPotential:
    """Equal-width complex layers on [0, length]; zero outside."""

    length: float
    values: tuple

    def __post_init__(self):
        vals = tuple(complex(v) for v in np.ravel(self.values))
        object.__setattr__(self, "values", vals)
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError("potential length must be positive and finite")
        if not vals:
            raise ValueError("need at least one layer")
        for j, v in enumerate(vals):
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError(f"layer {j} has a non-finite value")
            if v.imag > 0:
                raise ValueError(f"layer {j} has Im V > 0 (a source, not an absorber)")

    @classmethod
    def zero(cls, length: float, n: int) -> LayeredPotential:
        return cls(length, (0j,) * n)

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def width(self) -> float:
        return self.length / self.n

    @property
    def array(self) -> np.ndarray:
        return np.array(self.values, dtype=complex)

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n + 1)

    def is_absorbing(self) -> bool:
        return all(v.imag < 0 for v in self.values)

    def sublayers(self, p, units: Units = ATOMIC):
        """Split strongly absorbing layers so |Im q| * width <= SPLIT_THRESHOLD.

        Returns (values, widths, owner) for the refined stack.
        """
        p = np.atleast_1d(np.asarray(p, dtype=float))
        v = self.array
        e = np.array([p.min(), p.max()]) ** 2 / (2.0 * units.mass)
        q = np.sqrt(2.0 * units.mass * (e[:, None] - v[None, :]) + 0j) / units.hbar
        splits = np.maximum(1, np.ceil(np.abs(q.imag).max(axis=0) * self.width / SPLIT_THRESHOLD))
        splits = splits.astype(int)
        owner = np.repeat(np.arange(self.n), splits)
        widths = np.repeat(self.width / splits, splits)
        return v[owner], widths, owner

    # interchange file
    def dumps(self) -> str:
        lines = ["# layered complex potential, atomic units; lines: Re(V_j) Im(V_j)",
                 f"L {self.length:.17g}", f"N {self.n}"]
        lines += [f"{v.real:.17g} {v.imag:.17g}" for v in self.values]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> LayeredPotential:
        rows = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if line:
                rows.append((lineno, line.split()))
        try:
            (l1, f1), (l2, f2) = rows[0], rows[1]
            if f1[0] != "L" or f2[0] != "N" or len(f1) != 2 or len(f2) != 2:
                raise ValueError(f"line {l1}: expected 'L <length>' then 'N <count>'")
            length, n = float(f1[1]), int(f2[1])
            body = rows[2:]
            if len(body) != n:
                raise ValueError(f"expected {n} layer lines, found {len(body)}")
            vals = []
            for lineno, f in body:
                if len(f) != 2:
                    raise ValueError(f"line {lineno}: expected 'Re Im'")
                vals.append(complex(float(f[0]), float(f[1])))
        except IndexError:
            raise ValueError("potential file is truncated") from None
        return cls(length, tuple(vals))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> LayeredPotential:
        with open(path) as fh:
            return cls.loads(fh.read())


# ---------------------------------------------------------------- stationary scattering


def scatter_amplitudes(pot: LayeredPotential, p, units: Units = ATOMIC, want_grad: bool = False):
    """Vectorized R(p), T(p); with ``want_grad`` also dR/dV_j, dT/dV_j per layer."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any(p <= 0):
        raise ValueError("momenta must be positive")
    vals, widths, owner = pot.sublayers(p, units)
    out = kernels.transfer_scatter(vals, widths, p, units.mass, units.hbar, want_grad)
    if not want_grad:
        return out
    r, t, dr_sub, dt_sub = out
    dr = np.zeros((p.size, pot.n), dtype=complex)
    dt = np.zeros((p.size, pot.n), dtype=complex)
    np.add.at(dr.T, owner, dr_sub.T)
    np.add.at(dt.T, owner, dt_sub.T)
    return r, t, dr, dt


def survival(pot: LayeredPotential, p, units: Units = ATOMIC):
    """|R|^2 + |T|^2: probability that a plane wave is not absorbed."""
    r, t = scatter_amplitudes(pot, p, units)
    return np.abs(r) ** 2 + np.abs(t) ** 2


def absorption(pot: LayeredPotential, p, units: Units = ATOMIC):
    """1 - |R|^2 - |T|^2: absorbed fraction of a plane wave."""
    return 1.0 - survival(pot, p, units)


def _layer_propagate(q, w, psi, dpsi):
    z = q * w
    c = np.cos(z)
    sn = np.sin(z)
    small = np.abs(z) < 1e-4
    s_over_q = np.where(small, w * (1.0 - z * z / 6.0), sn / np.where(small, 1.0, q))
    return c * psi + s_over_q * dpsi, -q * sn * psi + c * dpsi


def _edge_states(vals, widths, p, r, units):
    """(psi, psi') at every sublayer edge, shape (np, nsub + 1)."""
    k = p / units.hbar
    e = p * p / (2.0 * units.mass)
    psi = np.empty((p.size, len(widths) + 1), dtype=complex)
    dpsi = np.empty_like(psi)
    psi[:, 0] = 1.0 + r
    dpsi[:, 0] = 1j * k * (1.0 - r)
    for j, (v, w) in enumerate(zip(vals, widths)):
        q = np.sqrt(2.0 * units.mass * (e - v) + 0j) / units.hbar
        psi[:, j + 1], dpsi[:, j + 1] = _layer_propagate(q, w, psi[:, j], dpsi[:, j])
    return psi, dpsi


@dataclass
class _Stack:
    """Scattering data for a set of momenta, enough to evaluate u_p(x) anywhere."""

    p: np.ndarray
    r: np.ndarray
    t: np.ndarray
    vals: np.ndarray
    edges: np.ndarray  # sublayer edges, nsub + 1
    psi: np.ndarray  # (np, nsub + 1)
    dpsi: np.ndarray
    length: float
    units: Units

    @classmethod
    def build(cls, pot: LayeredPotential, p, units: Units = ATOMIC):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        vals, widths, _ = pot.sublayers(p, units)
        r, t = kernels.transfer_scatter(vals, widths, p, units.mass, units.hbar, False)
        psi, dpsi = _edge_states(vals, widths, p, r, units)
        edges = np.concatenate([[0.0], np.cumsum(widths)])
        edges[-1] = pot.length
        return cls(p, r, t, vals, edges, psi, dpsi, pot.length, units)

    def values(self, x, derivative: bool = False):
        """u_p(x) (and du/dx) for all momenta, shape (np, nx)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        hb, m = self.units.hbar, self.units.mass
        k = (self.p / hb)[:, None]
        u = np.empty((self.p.size, x.size), dtype=complex)
        du = np.empty_like(u) if derivative else None
        left = x <= 0.0
        right = x >= self.length
        if left.any():
            xl = x[left][None, :]
            ep, em = np.exp(1j * k * xl), np.exp(-1j * k * xl)
            u[:, left] = ep + self.r[:, None] * em
            if derivative:
                du[:, left] = 1j * k * (ep - self.r[:, None] * em)
        if right.any():
            et = self.t[:, None] * np.exp(1j * k * x[right][None, :])
            u[:, right] = et
            if derivative:
                du[:, right] = 1j * k * et
        inside = ~(left | right)
        if inside.any():
            xi = x[inside]
            j = np.clip(np.searchsorted(self.edges, xi, side="right") - 1, 0, len(self.vals) - 1)
            s = xi - self.edges[j]
            e = (self.p * self.p / (2.0 * m))[:, None]
            q = np.sqrt(2.0 * m * (e - self.vals[j][None, :]) + 0j) / hb
            z = q * s[None, :]
            c, sn = np.cos(z), np.sin(z)
            small = np.abs(z) < 1e-4
            s_over_q = np.where(small, s[None, :] * (1.0 - z * z / 6.0),
                                sn / np.where(small, 1.0, q))
            p0, d0 = self.psi[:, j], self.dpsi[:, j]
            u[:, inside] = c * p0 + s_over_q * d0
            if derivative:
                du[:, inside] = -q * sn * p0 + c * d0
        return (u, du) if derivative else u


@dataclass
class ScatterSolution:
    """Stationary scattering state for one momentum."""

    p: float
    R: complex
    T: complex
    survival: float  # |R|^2 + |T|^2
    absorption: float  # 1 - |R|^2 - |T|^2
    wavenumbers: np.ndarray  # principal-branch k_j per layer
    layer_coeffs: np.ndarray  # (N, 2): A_j, B_j with u = A e^{ik s} + B e^{-ik s}, s = x - x_j
    edge_values: np.ndarray  # (N + 1, 2): (u, u') at layer edges
    stack: _Stack = field(repr=False)


def solve_scatter(pot: LayeredPotential, p: float, units: Units = ATOMIC) -> ScatterSolution:
    if not p > 0:
        raise ValueError("momentum must be positive")
    st = _Stack.build(pot, [p], units)
    r, t = complex(st.r[0]), complex(st.t[0])
    e = p * p / (2.0 * units.mass)
    k = np.sqrt(2.0 * units.mass * (e - pot.array) + 0j) / units.hbar
    edge_idx = np.searchsorted(st.edges, pot.edges - 1e-15 * pot.length)
    edge_idx[-1] = st.edges.size - 1
    uv = np.stack([st.psi[0, edge_idx], st.dpsi[0, edge_idx]], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = uv[:-1, 1] / (1j * k)
    coeffs = np.stack([0.5 * (uv[:-1, 0] + ratio), 0.5 * (uv[:-1, 0] - ratio)], axis=1)
    surv = abs(r) ** 2 + abs(t) ** 2
    return ScatterSolution(p, r, t, surv, 1.0 - surv, k, coeffs, uv, st)


def eigenfunction(sol: ScatterSolution, x, derivative: bool = False):
    """u_p(x): e^{ikx} + R e^{-ikx} left, layer solution inside, T e^{ikx} right."""
    scalar = np.ndim(x) == 0
    out = sol.stack.values(x, derivative)
    if derivative:
        u, du = out[0][0], out[1][0]
        return (complex(u[0]), complex(du[0])) if scalar else (u, du)
    return complex(out[0][0]) if scalar else out[0]


# ---------------------------------------------------------------- packet evolution


def initial_overlap(params: PacketParams, length: float, units: Units = ATOMIC) -> float:
    """Probability of the free initial packet inside [0, length]."""
    pk = get_packet(params, units)
    val, _ = integrate.quad(lambda x: float(pk.density(x, 0.0)), 0.0, length,
                            epsabs=1e-15, epsrel=1e-10, limit=200)
    return val


@dataclass
class _NodeData:
    stack: _Stack
    c: np.ndarray  # quadrature weight * amplitude / sqrt(2 pi hbar)
    energy: np.ndarray
    det_u: np.ndarray  # u_p at detector nodes, (np, nd)


class CapEvolution:
    """Packet evolving under a layered absorber, via the eigenstate expansion.

    Per-quadrature scattering data are cached; after construction the object
    is only read, so it can be shared between threads.
    """

    OVERLAP_TOL = 1e-8

    def __init__(self, pot: LayeredPotential, params: PacketParams, units: Units = ATOMIC,
                 quad: MomentumQuadrature | None = None, layer_order: int = 24,
                 check_overlap: bool = True):
        self.pot = pot
        self.params = params
        self.units = units
        self.packet = get_packet(params, units)
        self.quad = quad or packet_quadrature(params, units)
        if check_overlap:
            ov = initial_overlap(params, pot.length, units)
            self.overlap = ov
            if ov > self.OVERLAP_TOL:
                warnings.warn(f"initial packet has probability {ov:.3g} inside the absorber "
                              f"(> {self.OVERLAP_TOL:g}); the evolved state is the one that "
                              "was free in the remote past", OverlapWarning, stacklevel=2)
        xs, ws = [], []
        for a, b in zip(pot.edges[:-1], pot.edges[1:]):
            n, w = gl_panels([a, b], layer_order)
            xs.append(n)
            ws.append(w)
        self.det_x = np.concatenate(xs)
        self.det_w = np.concatenate(ws)
        imv = -np.repeat(pot.array.imag, layer_order)
        self.rate_w = 2.0 / units.hbar * imv * self.det_w
        self._cache: dict = {}
        self._stats = None

    # node data
    def nodes(self, quad: MomentumQuadrature) -> _NodeData:
        nd = self._cache.get(quad)
        if nd is None:
            p, w = quad.nodes, quad.weights
            st = _Stack.build(self.pot, p, self.units)
            c = w * self.packet.momentum_amplitude(p) / math.sqrt(2.0 * math.pi * self.units.hbar)
            energy = p * p / (2.0 * self.units.mass)
            nd = _NodeData(st, c, energy, st.values(self.det_x))
            if len(self._cache) > 12:
                self._cache.pop(next(iter(self._cache)))
            self._cache[quad] = nd
        return nd

    def _phases(self, nd: _NodeData, ts):
        return np.exp(-1j * np.outer(ts, nd.energy) / self.units.hbar) * nd.c[None, :]

    def _grouped(self, ts, fn, x_abs: float = 0.0):
        """Apply ``fn(node_data, t_chunk) -> (nch, nt)`` grouping times by rule level."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        quads = [self.quad.for_window(abs(t), x_abs, self.units.mass, self.units.hbar)
                 for t in ts]
        keys = np.array([q.coarse_panels for q in quads])
        out = None
        for key in np.unique(keys):
            idx = np.nonzero(keys == key)[0]
            quad = quads[idx[0]]
            nd = self.nodes(quad)
            chunk = max(1, int(4_000_000 // len(quad)))
            for s in range(0, idx.size, chunk):
                sel = idx[s:s + chunk]
                vals = np.atleast_2d(fn(nd, ts[sel]))
                if out is None:
                    out = np.empty((vals.shape[0], ts.size), dtype=vals.dtype)
                out[:, sel] = vals
        return out

    # observables at x = 0 and inside the detector
    def flux0(self, ts, quad: MomentumQuadrature | None = None):
        """J(0, t) of the absorbed evolution."""
        def fn(nd, tc):
            ph = self._phases(nd, tc)
            k = nd.stack.p / self.units.hbar
            psi = ph @ (1.0 + nd.stack.r)
            dpsi = ph @ (1j * k * (1.0 - nd.stack.r))
            return self.units.hbar / self.units.mass * np.imag(np.conj(psi) * dpsi)

        if quad is not None:
            return fn(self.nodes(quad), np.atleast_1d(ts))
        return self._grouped(ts, fn)[0]

    def detector(self, ts, quad: MomentumQuadrature | None = None):
        """(P_det, rate): probability inside [0, L] and absorption rate -dN/dt."""
        def fn(nd, tc):
            dens = np.abs(self._phases(nd, tc) @ nd.det_u) ** 2
            return np.stack([dens @ self.det_w, dens @ self.rate_w])

        if quad is not None:
            return fn(self.nodes(quad), np.atleast_1d(ts))
        out = self._grouped(ts, fn)
        return out[0], out[1]

    def amplitude(self, x, t: float, quad: MomentumQuadrature | None = None):
        """psi(x, t) on an array of x for one time."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if quad is None:
            quad = self.quad.for_window(abs(t), float(np.max(np.abs(x))), self.units.mass,
                                        self.units.hbar)
        nd = self.nodes(quad)
        ph = self._phases(nd, [t])[0]
        out = np.empty(x.size, dtype=complex)
        step = max(1, int(4_000_000 // len(quad)))
        for s in range(0, x.size, step):
            out[s:s + step] = ph @ nd.stack.values(x[s:s + step])
        return out

    def amplitude_converged(self, x, t: float, tol: float = 1e-8):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        start = self.quad.for_window(abs(t), float(np.max(np.abs(x))), self.units.mass,
                                     self.units.hbar)
        first = self.amplitude(x, t, start)
        scale = max(1.0, float(np.max(np.abs(first))))
        val, _ = converge_by_doubling(lambda q: self.amplitude(x, t, q), start, tol, scale=scale)
        return val

    # norms
    def _side_correction(self, t, x_a, x_b, which, panel=0.01, order=32):
        """Integral on [x_a, x_b] of |psi|^2 - |psi_free|^2 (left) or |psi|^2 (right).

        Left of the absorber psi = psi_free + psi_R with psi_R the reflected
        wave; right of it psi = psi_T.  Both are plane-wave sums, evaluated as
        a per-panel phase times a shared in-panel table so the work is one
        matrix product.  Returns (integral, tail estimate beyond the outer edge).
        """
        npan = max(4, int(math.ceil((x_b - x_a) / panel)))
        edges = np.linspace(x_a, x_b, npan + 1)
        h = edges[1] - edges[0]
        g, gw = gl_panels([0.0, h], order)
        quad = self.quad.for_window(abs(t), max(abs(x_a), abs(x_b)), self.units.mass,
                                    self.units.hbar)
        nd = self.nodes(quad)
        ph = self._phases(nd, [t])[0]
        k = nd.stack.p / self.units.hbar
        sign, amp = (-1.0, nd.stack.r) if which == "left" else (1.0, nd.stack.t)
        table = np.exp(sign * 1j * np.outer(k, g))  # (np, order)
        wave = np.empty((npan, order), dtype=complex)
        step = max(1, int(2_000_000 // len(quad)))
        for s in range(0, npan, step):
            lead = np.exp(sign * 1j * np.outer(edges[:-1][s:s + step], k)) * (ph * amp)[None, :]
            wave[s:s + step] = lead @ table
        xs = edges[:-1, None] + g[None, :]
        dens = np.abs(wave) ** 2
        if which == "left":
            free = self.packet.amplitude(xs.ravel(), t).reshape(xs.shape)
            vals = 2.0 * np.real(np.conj(free) * wave) + dens
        else:
            vals = dens
        total = float(np.sum(vals @ gw))

        # tail: power law through the envelope of |wave|^2 on two outer panels,
        # plus the oscillating cross term estimated by one integration by parts
        outer, inner = (0, npan // 2) if which == "left" else (npan - 1, npan // 2)
        centre = self._packet_centre(t, which)
        r1 = abs(xs[outer].mean() - centre)
        r2 = abs(xs[inner].mean() - centre)
        d1 = float(dens[outer] @ gw) / h
        d2 = float(dens[inner] @ gw) / h
        n = math.log(d2 / d1) / math.log(r1 / r2) if d1 > 0 and d2 > d1 and r1 > r2 else 2.0
        tail = d1 * r1 / (max(n, 2.0) - 1.0)
        if which == "left":
            edge_val = abs(free[outer, 0] * wave[outer, 0])
            tail += 4.0 * edge_val / max(float(k.min()), 1.0)
        return total, tail

    def _packet_centre(self, t, which):
        """Rough centre of the reflected (left) or transmitted (right) packet."""
        v = (self.params.b + self.params.p0) / self.units.mass
        x_free = self.params.x0 + v * t
        return -x_free if which == "left" else x_free

    def _free_left(self, t):
        """int_{-inf}^0 |psi_free|^2 dx from the closed form."""
        pk = self.packet
        xc = self.params.x0 + (self.params.b + self.params.p0) * t / self.units.mass
        f = lambda x: float(pk.density(x, t))  # noqa: E731
        lo = min(-2.0, 3.0 * xc)
        pts = [p for p in (xc, 0.5 * xc) if lo < p < 0] or None
        a, _ = integrate.quad(f, -np.inf, lo, epsabs=1e-14, limit=400)
        b, _ = integrate.quad(f, lo, 0.0, points=pts, epsabs=1e-14, epsrel=1e-13, limit=1000)
        return a + b

    def norms(self, t: float, tail_tol: float = 1e-8, reach: float | None = None):
        """(N, N_minus, N_plus) at time t by spatial quadrature.

        The free part of N_minus comes from the closed-form packet over the
        whole half line; reflected and transmitted waves are integrated on a
        window of size ``reach`` (default grows with |t|) with power-law tails.
        """
        if reach is None:
            vel = (self.params.b + self.params.p0 + 2.0 * self.units.hbar / self.params.delta)
            reach = 4.0 + 1.2 * vel * abs(t) / self.units.mass
        free_left = self._free_left(t)
        corr, corr_tail = self._side_correction(t, -reach, 0.0, "left")
        p_det, _ = self.detector([t])
        right, right_tail = self._side_correction(t, self.pot.length, self.pot.length + reach,
                                                  "right")
        tail = corr_tail + right_tail
        if tail > tail_tol:
            raise TailBoundError(f"spatial tail estimate {tail:.3g} exceeds {tail_tol:g} at t={t}")
        n_minus = free_left + corr
        n_plus = float(p_det[0]) + right
        return n_minus + n_plus, n_minus, n_plus

    def absorption_rate(self, t: float, h: float = 1e-7, check_tol: float | None = None):
        """-dN/dt by the absorber volume integral and by differentiating N(t).

        Returns (volume, finite_difference).  With ``check_tol`` the two are
        compared relative to the peak rate and MethodDisagreementError raised.
        """
        _, rate = self.detector([t])
        n = [self.norms(t + s * h)[0] for s in (-2, -1, 1, 2)]
        fd = -(n[0] - 8.0 * n[1] + 8.0 * n[2] - n[3]) / (12.0 * h)
        vol = float(rate[0])
        if check_tol is not None:
            peak = self.statistics().peak_rate
            if abs(vol - fd) > check_tol * peak:
                raise MethodDisagreementError(
                    f"absorption rate methods disagree at t={t}: {vol:.6g} vs {fd:.6g}")
        return vol, fd

    # whole-time-axis statistics
    def arrival_time(self) -> float:
        return -self.params.x0 * self.units.mass / (self.params.b + self.params.p0)

    def statistics(self, rtol: float = 1e-10, far_factor: float = 50.0) -> CapStatistics:
        """Whole-axis integrals; the time axis beyond +-far_factor * arrival time is
        covered by a fitted power-law tail."""
        key = (rtol, far_factor)
        if self._stats is None or self._stats[0] != key:
            self._stats = key, self._compute_statistics(rtol, far_factor)
        return self._stats[1]

    def _compute_statistics(self, rtol, far_factor):
        t_arr = self.arrival_time()
        free = self.packet

        def fn(ts):
            p_det, rate = self.detector(ts)
            j_cap = self.flux0(ts)
            j_free = free.flux(0.0, ts)
            return np.stack([rate, ts * rate, p_det, j_cap, ts * j_cap, j_free, ts * j_free])

        res = integrate_time_axis(fn, -2.0 * t_arr, 3.0 * t_arr, far_factor * t_arr, rtol=rtol)
        v = res.values
        ts = np.linspace(0.0, 3.0 * t_arr, 2001)
        peak = float(np.max(self.detector(ts)[1]))
        return CapStatistics(absorbed=v[0], mean_rate=v[1] / v[0], dwell=v[2],
                             crossed_cap=v[3], mean_flux_cap=v[4] / v[3],
                             crossed_free=v[5], mean_flux_free=v[6] / v[5],
                             peak_rate=peak, integral=res)

    # stationary cross-checks
    def momentum_absorbed(self, tol: float = 1e-12) -> float:
        """int |<p|psi'(0)>|^2 (1 - |R|^2 - |T|^2) dp."""
        def fn(q):
            p = q.nodes
            return q.weights @ (self.packet.momentum_density(p) * absorption(self.pot, p, self.units))
        val, _ = converge_by_doubling(fn, self.quad, tol)
        return float(val)

    def stationary_dwell(self, tol: float = 1e-12) -> float:
        """int |<p|psi'(0)>|^2 (m/p) int_0^L |u_p|^2 dx dp (time-integrated presence)."""
        def fn(q):
            p = q.nodes
            st = _Stack.build(self.pot, p, self.units)
            inside = (np.abs(st.values(self.det_x)) ** 2) @ self.det_w
            return q.weights @ (self.packet.momentum_density(p) * self.units.mass / p * inside)
        val, _ = converge_by_doubling(fn, self.quad, tol)
        return float(val)


@dataclass
class CapStatistics:
    """Integrals over the whole time axis of the absorbed evolution."""

    absorbed: float  # int -dN/dt dt = 1 - N(+inf)
    mean_rate: float  # <t> under -dN/dt
    dwell: float  # int dt int_0^L |psi|^2 dx
    crossed_cap: float  # int J(0,t) dt with the absorber
    mean_flux_cap: float
    crossed_free: float  # int J_free(0,t) dt (= 1)
    mean_flux_free: float
    peak_rate: float
    integral: TimeIntegral = field(repr=False)


@functools.lru_cache(maxsize=8)
def get_evolution(pot: LayeredPotential, params: PacketParams, units: Units = ATOMIC):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OverlapWarning)
        return CapEvolution(pot, params, units)


# ---------------------------------------------------------------- functional API


def _evolution(pot, params, quad, units):
    if quad is None:
        return get_evolution(pot, params, units)
    return CapEvolution(pot, params, units, quad=quad)


def evolve_with_cap(pot: LayeredPotential, params: PacketParams, quad, x, t,
                    units: Units = ATOMIC, tol: float = 1e-8):
    """psi(x, t) converged under momentum-node doubling."""
    ev = _evolution(pot, params, quad, units)
    out = ev.amplitude_converged(x, t, tol)
    return complex(out[0]) if np.ndim(x) == 0 else out


def norms(pot: LayeredPotential, params: PacketParams, quad, t, units: Units = ATOMIC):
    return _evolution(pot, params, quad, units).norms(t)


def absorption_rate(pot: LayeredPotential, params: PacketParams, quad, t, units: Units = ATOMIC):
    return _evolution(pot, params, quad, units).absorption_rate(t)


def dwell_time(pot: LayeredPotential, params: PacketParams, quad=None, units: Units = ATOMIC):
    """Mean time spent inside [0, L], integrated over the whole time axis."""
    return _evolution(pot, params, quad, units).statistics().dwell


__all__ = [
    "LayeredPotential", "ScatterSolution", "CapEvolution", "CapStatistics", "OverlapWarning",
    "TailBoundError", "MethodDisagreementError", "NonConvergenceError", "scatter_amplitudes",
    "survival", "absorption", "solve_scatter", "eigenfunction", "initial_overlap",
    "evolve_with_cap", "norms", "absorption_rate", "dwell_time", "get_evolution",
]
