"""Analytic free wave packet with only positive momenta, and its boost.

The momentum amplitude is

    <p|psi(0)> = C (1 - exp(-alpha p^2/hbar^2))
                 * exp(-delta^2 (p - p0)^2/hbar^2 - i p x0/hbar) * Theta(p)

and the boosted state is <p|psi'(0)> = <p - b|psi(0)>.  The free evolution
is available in closed form through two Faddeeva functions; the boosted
packet follows from the Galilean relation

    psi'(x, t) = exp(i (b x - b^2 t/(2m))/hbar) psi(x - b t/m, t).

Plane waves are normalized as <x|p> = exp(i p x/hbar)/sqrt(2 pi hbar).
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from . import kernels
from .specfun import faddeeva_w


class QuadratureError(RuntimeError):
    """An integral failed to converge to the requested tolerance."""


@dataclass(frozen=True)
class Units:
    hbar: float = 1.0
    mass: float = 1.0


ATOMIC = Units()


@dataclass(frozen=True)
class PacketParams:
    """Packet shape (alpha, delta, p0, x0) plus boost momentum b, atomic units."""

    alpha: float
    delta: float
    p0: float
    x0: float
    b: float = 0.0

    def __post_init__(self):
        if not all(map(math.isfinite, (self.alpha, self.delta, self.p0, self.x0, self.b))):
            raise ValueError("packet parameters must be finite")
        if self.delta**2 + self.alpha <= 0:
            raise ValueError("need delta**2 + alpha > 0")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.p0 <= 0:
            raise ValueError("p0 must be positive")
        if self.b < 0:
            raise ValueError("boost b must be non-negative")
        if self.x0 > -3.0 * self.delta:
            raise ValueError(f"x0={self.x0} is not well left of the origin (need x0 <= -3 delta)")
        if self.x0 > -10.0 * self.delta:
            warnings.warn(f"x0={self.x0} is closer than 10 delta to the origin", stacklevel=3)

    def with_boost(self, b: float) -> PacketParams:
        return replace(self, b=b)


#: Parameters of the published backflow example.
FIGURE1 = PacketParams(alpha=1.4, delta=0.007, p0=1.0, x0=-0.22, b=300.0)


def _density_unnormalized(q, params, units):
    hb = units.hbar
    return (-np.expm1(-params.alpha * q * q / hb**2)) ** 2 * np.exp(
        -2.0 * params.delta**2 * (q - params.p0) ** 2 / hb**2)


def momentum_cutoff(params: PacketParams, units: Units = ATOMIC, rel: float = 1e-16) -> float:
    """Shifted momentum q beyond which the density is below ``rel`` of its Gaussian peak."""
    return params.p0 + units.hbar * math.sqrt(-math.log(rel) / (2.0 * params.delta**2))


def normalize(params: PacketParams, units: Units = ATOMIC) -> float:
    """Normalization constant C of the momentum amplitude, by adaptive quadrature."""
    return _normalize(params, units)


@functools.lru_cache(maxsize=64)
def _normalize(params, units):
    qmax = momentum_cutoff(params, units, 1e-30)
    width = units.hbar / math.sqrt(params.delta**2 + params.alpha)
    peak = max(params.p0, 0.0)
    breaks = sorted({0.0, min(10 * width, qmax), min(peak, qmax),
                     min(peak + 4 * units.hbar / params.delta, qmax), qmax})
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        val, err = integrate.quad(_density_unnormalized, lo, hi, args=(params, units),
                                  epsabs=0.0, epsrel=5e-14, limit=400)
        if err > 1e-12 * abs(val) + 1e-300:
            raise QuadratureError(f"normalization quadrature stalled on [{lo}, {hi}]")
        total += val
    tail, _ = integrate.quad(_density_unnormalized, qmax, np.inf, args=(params, units))
    total += tail
    return 1.0 / math.sqrt(total)


def closed_form_prefactor(params: PacketParams) -> float:
    """Position-space prefactor C' from its closed-form Faddeeva expression."""
    d, a, k0 = params.delta, params.alpha, params.p0  # k0 = p0/hbar in atomic units
    s1 = 2.0 * d * d + a
    s2 = 2.0 * (d * d + a)
    brace = (faddeeva_w(-1j * math.sqrt(2.0) * k0 * d) / (2.0**1.5 * d)
             - faddeeva_w(-2j * k0 * d * d / math.sqrt(s1)) / math.sqrt(s1)
             + faddeeva_w(-2j * k0 * d * d / math.sqrt(s2)) / math.sqrt(4.0 * s2))
    return float(np.real(brace) ** -0.5 / (2.0**1.5 * math.pi**0.25))


class Packet:
    """Normalized packet bound to a unit convention; evaluation entry point."""

    def __init__(self, params: PacketParams, units: Units = ATOMIC):
        self.params = params
        self.units = units
        self.norm = normalize(params, units)
        k0 = params.p0 / units.hbar
        self.cprime = (self.norm * math.sqrt(units.hbar) / (2.0 * math.sqrt(2.0))
                       * math.exp(-(k0 * params.delta) ** 2))

    # momentum space
    def momentum_amplitude(self, p):
        p = np.asarray(p, dtype=float)
        pr, hb = self.params, self.units.hbar
        q = p - pr.b
        pos = q > 0
        qs = np.where(pos, q, 0.0)
        amp = (-np.expm1(-pr.alpha * qs * qs / hb**2)) * np.exp(
            -pr.delta**2 * (qs - pr.p0) ** 2 / hb**2 - 1j * qs * pr.x0 / hb)
        out = np.where(pos, self.norm * amp, 0.0 + 0.0j)
        return complex(out) if out.ndim == 0 else out

    def momentum_density(self, p):
        return np.abs(self.momentum_amplitude(p)) ** 2

    # position space
    def _unboosted(self, x, t):
        pr, u = self.params, self.units
        return kernels.packet_eval(x, t, pr.alpha, pr.delta, pr.p0 / u.hbar, pr.x0,
                                   u.hbar, u.mass, self.cprime)

    def amplitude_and_gradient(self, x, t):
        """psi'(x, t) and d psi'/dx for the boosted free packet."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        b, u = self.params.b, self.units
        if b == 0.0:
            return self._unboosted(x, t)
        psi, dpsi = self._unboosted(x - b * t / u.mass, t)
        ph = np.exp(1j * (b * x - 0.5 * b * b * t / u.mass) / u.hbar)
        return ph * psi, ph * (dpsi + 1j * b / u.hbar * psi)

    def amplitude(self, x, t):
        return self.amplitude_and_gradient(x, t)[0]

    def density(self, x, t):
        return np.abs(self.amplitude(x, t)) ** 2

    def flux(self, x, t):
        """Probability current (hbar/m) Im(psi* d psi/dx)."""
        psi, dpsi = self.amplitude_and_gradient(x, t)
        return self.units.hbar / self.units.mass * np.imag(np.conj(psi) * dpsi)

    def velocity(self, x, t):
        psi, dpsi = self.amplitude_and_gradient(x, t)
        return self.units.hbar / self.units.mass * np.imag(dpsi / psi)

    def unboosted(self) -> Packet:
        return get_packet(replace(self.params, b=0.0), self.units)

    def spatial_scale(self, t: float) -> float:
        """Rough width of the packet core at time t."""
        d = self.params.delta
        return math.sqrt(d * d + (self.units.hbar * t / (2.0 * self.units.mass * d)) ** 2)


@functools.lru_cache(maxsize=64)
def get_packet(params: PacketParams, units: Units = ATOMIC) -> Packet:
    return Packet(params, units)


def momentum_amplitude(params: PacketParams, p, units: Units = ATOMIC):
    return get_packet(params, units).momentum_amplitude(p)


def position_amplitude_free(params: PacketParams, x, t, units: Units = ATOMIC):
    return get_packet(params, units).amplitude(x, t)


def flux_free(params: PacketParams, x, t, units: Units = ATOMIC):
    return get_packet(params, units).flux(x, t)


def boost_flux_relation_check(params: PacketParams, t, units: Units = ATOMIC):
    """Residual of J_boosted(0,t) = J(-b t/m, t) + (b/m)|psi(-b t/m, t)|^2."""
    boosted = get_packet(params, units)
    plain = boosted.unboosted()
    xs = -params.b * np.asarray(t, dtype=float) / units.mass
    rhs = plain.flux(xs, t) + params.b / units.mass * plain.density(xs, t)
    return np.abs(boosted.flux(0.0, t) - rhs)
