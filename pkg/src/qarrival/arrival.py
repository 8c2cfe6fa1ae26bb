"""Arrival-time distributions at x = 0 for the free packet and backflow analysis.

Kijowski's distribution is

    Pi_K(t) = |(1/sqrt(m h)) int_0^inf sqrt(p) e^{-i p^2 t/(2 m hbar)} <p|psi(0)> dp|^2,

the Bohm distribution is |J(0,t)| normalized by its time integral, and Bohm
trajectories follow dx/dt = J/|psi|^2.  All time integrals run over the whole
real line: the packet family has algebraic position tails, so a finite part
of the flux crosses x = 0 before t = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize

from .quadrature import (MomentumQuadrature, NonConvergenceError, converge_by_doubling,
                         gl_panels, integrate_time_axis, packet_quadrature)
from .wavepacket import ATOMIC, PacketParams, Units, get_packet

#: least upper bound on probability backflow through one interval
BRACKEN_MELLOY = 0.04


class DensityVanishingError(RuntimeError):
    """A trajectory entered a region where the density is below threshold."""


@dataclass
class TimeSeries:
    t: np.ndarray
    channels: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        if self.t.ndim != 1 or self.t.size == 0:
            raise ValueError("time grid must be a non-empty 1-d array")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("time grid must be strictly increasing")
        for name, col in list(self.channels.items()):
            self.add(name, col)

    def add(self, name: str, values) -> None:
        values = np.asarray(values, dtype=float)
        if values.shape != self.t.shape:
            raise ValueError(f"channel {name!r} has shape {values.shape}, expected {self.t.shape}")
        self.channels[name] = values

    def __getitem__(self, name):
        return self.channels[name]

    def to_csv(self, fh) -> None:
        for key, val in self.meta.items():
            fh.write(f"# {key}: {val}\n")
        names = ["t", *self.channels]
        fh.write(",".join(names) + "\n")
        cols = [self.t, *self.channels.values()]
        for row in zip(*cols):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def read_csv(cls, fh) -> TimeSeries:
        meta, header, rows = {}, None, []
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append([float(v) for v in line.split(",")])
        data = np.array(rows).reshape(-1, len(header))
        return cls(data[:, 0], {n: data[:, i] for i, n in enumerate(header[1:], 1)}, meta)


@dataclass
class BackflowReport:
    intervals: list  # (t_start, t_end) with J(0,t) < 0 inside
    magnitudes: list  # int (-J) dt per interval
    peak_flux: float

    @property
    def total(self) -> float:
        return float(sum(self.magnitudes))

    @property
    def within_bound(self) -> bool:
        return all(0.0 < m < BRACKEN_MELLOY for m in self.magnitudes)


# ---------------------------------------------------------------- Kijowski


def _kijowski_amp(packet, quad: MomentumQuadrature, ts, x: float):
    units = packet.units
    p, w = quad.nodes, quad.weights
    c = w * np.sqrt(p) * packet.momentum_amplitude(p) * np.exp(1j * p * x / units.hbar)
    c = c / math.sqrt(units.mass * 2.0 * math.pi * units.hbar)
    e = p * p / (2.0 * units.mass * units.hbar)
    out = np.empty(ts.size, dtype=complex)
    step = max(1, int(4_000_000 // p.size))
    for s in range(0, ts.size, step):
        out[s:s + step] = np.exp(-1j * np.outer(ts[s:s + step], e)) @ c
    return out


def kijowski(params: PacketParams, t, quad: MomentumQuadrature | None = None,
             units: Units = ATOMIC, x: float = 0.0, tol: float | None = None):
    """Pi_K(t) at the arrival point x (0 by default).

    Without ``tol`` the momentum rule is sized from |t| and |x|; with ``tol``
    every value is additionally confirmed by node doubling (absolute change
    below tol times the largest value).
    """
    packet = get_packet(params, units)
    base = quad or packet_quadrature(params, units)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(ts.size)
    levels = [base.for_window(abs(v), abs(x), units.mass, units.hbar) for v in ts]
    keys = np.array([q.coarse_panels for q in levels])
    for key in np.unique(keys):
        idx = np.nonzero(keys == key)[0]
        q = levels[idx[0]]
        tsel = ts[idx]
        if tol is None:
            out[idx] = np.abs(_kijowski_amp(packet, q, tsel, x)) ** 2
        else:
            first = np.abs(_kijowski_amp(packet, q, tsel, x)) ** 2
            scale = max(float(first.max()), 1e-300)
            val, _ = converge_by_doubling(
                lambda qq: np.abs(_kijowski_amp(packet, qq, tsel, x)) ** 2, q, tol, scale=scale)
            out[idx] = val
    return float(out[0]) if np.ndim(t) == 0 else out


def arrival_core(params: PacketParams, units: Units = ATOMIC):
    """(t_lo, t_hi, far) bracketing the main arrival for whole-axis integrals."""
    t_arr = -params.x0 * units.mass / (params.b + params.p0)
    return -2.0 * t_arr, 3.0 * t_arr, 50.0 * t_arr


def kijowski_normalization(params: PacketParams, units: Units = ATOMIC, rtol: float = 1e-10):
    """int Pi_K dt over the whole time axis (1 by construction of the transform)."""
    lo, hi, far = arrival_core(params, units)
    res = integrate_time_axis(lambda ts: kijowski(params, ts, units=units), lo, hi, far,
                              rtol=rtol)
    return float(res.values[0])


# ---------------------------------------------------------------- flux based


def _abs_flux_integral(params: PacketParams, units: Units):
    # |J| has kinks at the flux zeros; integrate the smooth J over the whole
    # axis and add back twice the negative lobes, each integrated between roots
    packet = get_packet(params, units)
    lo, hi, far = arrival_core(params, units)
    res = integrate_time_axis(lambda ts: packet.flux(0.0, ts), lo, hi, far, rtol=1e-11)
    scan = np.linspace(lo, hi, 64001)
    rep = backflow_report(params, scan, units)
    return float(res.values[0]) + 2.0 * rep.total


_ABS_FLUX: dict = {}


def bohm_normalization(params: PacketParams, units: Units = ATOMIC) -> float:
    """int |J(0,t)| dt; equals 1 plus twice the total backflow."""
    key = (params, units)
    if key not in _ABS_FLUX:
        _ABS_FLUX[key] = _abs_flux_integral(params, units)
    return _ABS_FLUX[key]


def bohm_distribution(params: PacketParams, t, units: Units = ATOMIC):
    """Pi_B(t) = |J(0,t)| / int |J(0,t')| dt'."""
    j = get_packet(params, units).flux(0.0, t)
    return np.abs(j) / bohm_normalization(params, units)


def bohm_trajectory(params: PacketParams, x_start, t_span, units: Units = ATOMIC,
                    t_eval=None, rtol: float = 1e-10, density_floor: float = 1e-12):
    """Integrate dx/dt = J/|psi|^2 for one or several starting points.

    Returns (t, x) with x of shape (n_starts, n_t).  Trajectories never cross,
    so several starts can share one adaptive integration.
    """
    packet = get_packet(params, units)
    x0 = np.atleast_1d(np.asarray(x_start, dtype=float))
    t0, t1 = map(float, t_span)
    rho0 = packet.density(x0, t0)
    if np.any(rho0 < density_floor):
        raise DensityVanishingError("start point lies where the density vanishes")

    def rhs(t, x):
        return packet.velocity(x, t)

    def low_density(t, x):
        return float(np.min(packet.density(x, t))) - density_floor

    low_density.terminal = True
    sol = integrate.solve_ivp(rhs, (t0, t1), x0, method="DOP853", rtol=rtol, atol=1e-13,
                              t_eval=t_eval, events=low_density, dense_output=False)
    if sol.status == 1:
        raise DensityVanishingError(f"trajectory density fell below {density_floor:g} "
                                    f"at t={sol.t_events[0][0]:.6g}")
    if sol.status != 0:
        raise NonConvergenceError(f"trajectory integration failed: {sol.message}")
    return sol.t, sol.y


def crossings(path_x) -> list:
    """Signed crossings of x = 0 along a sampled path: +1 left-to-right, -1 back."""
    s = np.sign(np.asarray(path_x))
    s[s == 0] = 1
    jumps = np.nonzero(np.diff(s))[0]
    return [int(np.sign(s[i + 1] - s[i])) for i in jumps]


def density_quantiles(params: PacketParams, probs, t: float = 0.0, units: Units = ATOMIC,
                      window: float = 2.0):
    """Positions below which the packet holds the given probabilities at time t."""
    packet = get_packet(params, units)
    centre = params.x0 + (params.b + params.p0) * t / units.mass
    edges = np.linspace(centre - window, centre + window, 4001)
    xs, ws = gl_panels(edges, 8)
    cdf = np.concatenate([[0.0], np.cumsum((packet.density(xs, t) * ws).reshape(-1, 8).sum(1))])
    mass = cdf[-1]
    probs = np.asarray(probs, dtype=float) * mass
    return np.interp(probs, cdf, edges)


def backflow_trajectory(params: PacketParams, units: Units = ATOMIC, t_grid=None):
    """A trajectory through x = 0 in the middle of the first backflow interval.

    Integrates backwards from (0, t_mid) to t = 0 for the start point, then
    forwards over the reporting window.  Returns (x_start, t, x).
    """
    if t_grid is None:
        t_grid = np.linspace(0.0, 1.6e-3, 4001)
    rep = backflow_report(params, t_grid, units)
    if not rep.intervals:
        raise ValueError("packet shows no backflow on the grid")
    a, b = rep.intervals[0]
    t_mid = 0.5 * (a + b)
    _, back = bohm_trajectory(params, [0.0], (t_mid, float(t_grid[0])), units)
    x_start = float(back[0, -1])
    t, x = bohm_trajectory(params, [x_start], (float(t_grid[0]), float(t_grid[-1])), units,
                           t_eval=t_grid)
    return x_start, t, x[0]


# ---------------------------------------------------------------- backflow


def backflow_report(params: PacketParams, t_grid, units: Units = ATOMIC,
                    xtol: float = 1e-15) -> BackflowReport:
    """Intervals on the grid where J(0,t) < 0, with root-refined endpoints."""
    packet = get_packet(params, units)
    t_grid = np.asarray(t_grid, dtype=float)
    j = packet.flux(0.0, t_grid)

    def f(tt):
        return float(packet.flux(0.0, tt))

    neg = j < 0
    starts = np.nonzero(~neg[:-1] & neg[1:])[0]
    ends = np.nonzero(neg[:-1] & ~neg[1:])[0]
    if neg[0] or neg[-1]:
        raise ValueError("backflow interval touches the edge of the time grid")
    intervals, mags = [], []
    for i0, i1 in zip(starts, ends):
        ta = optimize.brentq(f, t_grid[i0], t_grid[i0 + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)
        tb = optimize.brentq(f, t_grid[i1], t_grid[i1 + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)
        mag, _ = integrate.quad(lambda tt: -f(tt), ta, tb, epsabs=0.0, epsrel=1e-12, limit=200)
        intervals.append((ta, tb))
        mags.append(mag)
    return BackflowReport(intervals, mags, float(j.max()))


def kijowski_boost_residual(params: PacketParams, t, units: Units = ATOMIC):
    """Pi_K'(0,t) - Pi_K(-bt/m, t) - (b/m)|psi(-bt/m, t)|^2.

    The corresponding combination for the flux vanishes identically; for the
    Kijowski distribution it does not.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    plain = replace(params, b=0.0)
    packet = get_packet(plain, units)
    boosted = kijowski(params, ts, units=units)
    out = np.empty(ts.size)
    for i, tt in enumerate(ts):
        xs = -params.b * tt / units.mass
        pk = kijowski(plain, tt, units=units, x=xs)
        out[i] = boosted[i] - pk - params.b / units.mass * float(packet.density(xs, tt))
    return out


# ---------------------------------------------------------------- moments


def distribution_moments(series: TimeSeries, channel: str, signed: bool = False):
    """(mean time, normalization) of a channel on the series grid (Simpson rule)."""
    c = series[channel]
    if not signed and np.any(c < 0):
        raise ValueError(f"channel {channel!r} has negative values; pass signed=True")
    norm = float(integrate.simpson(c, x=series.t))
    if norm <= 0:
        raise ValueError(f"channel {channel!r} has non-positive normalization {norm:g}")
    mean = float(integrate.simpson(series.t * c, x=series.t)) / norm
    return mean, norm
