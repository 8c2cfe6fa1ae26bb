"""Composite Gauss-Legendre rules for momentum and time integrals.

The momentum integrands carry a phase exp(-i p^2 t/(2 m hbar) + i p x/hbar), so
the panel count grows with |t| and |x| to keep the phase change per panel
bounded.  Every rule can be refined by panel doubling for convergence checks.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

PANEL_ORDER = 32
#: largest phase change (radians) allowed across one panel
MAX_PANEL_PHASE = 20.0


class NonConvergenceError(RuntimeError):
    """Refinement by node doubling did not reach the requested tolerance."""


@functools.lru_cache(maxsize=16)
def _gl(n: int):
    x, w = leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gl_panels(edges, order: int = PANEL_ORDER):
    """Nodes and weights of a composite rule on consecutive ``edges``."""
    edges = np.asarray(edges, dtype=float)
    g, w = _gl(order)
    h = np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + 0.5 * h[:, None] * g[None, :]).ravel()
    weights = (0.5 * h[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True)
class MomentumQuadrature:
    """Composite rule over the packet's momentum support.

    A fine block resolves the rise of the amplitude just above the boost
    momentum; a coarse block covers the Gaussian body up to ``p_hi``.
    """

    p_lo: float
    p_split: float
    p_hi: float
    fine_panels: int
    coarse_panels: int
    order: int = PANEL_ORDER

    def __post_init__(self):
        if not (self.p_lo < self.p_split < self.p_hi):
            raise ValueError("need p_lo < p_split < p_hi")
        if self.p_lo < 0:
            raise ValueError("momentum support must be non-negative")
        if self.fine_panels < 1 or self.coarse_panels < 1:
            raise ValueError("panel counts must be positive")

    @functools.cached_property
    def _rule(self):
        e1 = np.linspace(self.p_lo, self.p_split, self.fine_panels + 1)
        e2 = np.linspace(self.p_split, self.p_hi, self.coarse_panels + 1)
        n1, w1 = gl_panels(e1, self.order)
        n2, w2 = gl_panels(e2, self.order)
        return np.concatenate([n1, n2]), np.concatenate([w1, w2])

    @property
    def nodes(self) -> np.ndarray:
        return self._rule[0]

    @property
    def weights(self) -> np.ndarray:
        return self._rule[1]

    def __len__(self):
        return self.nodes.size

    def doubled(self) -> MomentumQuadrature:
        return MomentumQuadrature(self.p_lo, self.p_split, self.p_hi,
                                  2 * self.fine_panels, 2 * self.coarse_panels, self.order)

    def for_window(self, t_abs: float, x_abs: float = 0.0, mass: float = 1.0,
                   hbar: float = 1.0) -> MomentumQuadrature:
        """Refine (never coarsen) so the phase at |t|, |x| is resolved.

        Panel counts are rounded up to a power-of-two multiple of the base
        count so that repeated calls share a small set of rules.
        """
        slope = (self.p_hi * t_abs / mass + x_abs) / hbar
        need_c = math.ceil((self.p_hi - self.p_split) * slope / MAX_PANEL_PHASE)
        need_f = math.ceil((self.p_split - self.p_lo) * slope / MAX_PANEL_PHASE)
        factor = 1
        while self.coarse_panels * factor < need_c or self.fine_panels * factor < need_f:
            factor *= 2
        if factor == 1:
            return self
        return MomentumQuadrature(self.p_lo, self.p_split, self.p_hi,
                                  self.fine_panels * factor, self.coarse_panels * factor,
                                  self.order)


def packet_quadrature(params, units=None, fine_panels: int = 2, coarse_panels: int = 16,
                      tail_rel: float = 1e-24) -> MomentumQuadrature:
    """Base rule for a packet: support [b, b + q_hi], where the density has fallen to
    ``tail_rel`` of its peak so the omitted amplitude integral is below ~1e-12."""
    from .wavepacket import ATOMIC, momentum_cutoff

    units = units or ATOMIC
    q_hi = momentum_cutoff(params, units, tail_rel)
    q_split = min(10.0 * units.hbar / math.sqrt(params.alpha + params.delta**2), 0.5 * q_hi)
    return MomentumQuadrature(params.b, params.b + q_split, params.b + q_hi,
                              fine_panels, coarse_panels)


def converge_by_doubling(fn, quad: MomentumQuadrature, tol: float, max_nodes: int | None = None,
                         scale: float | None = None):
    """Evaluate ``fn(quad)`` under panel doubling until successive results agree.

    Agreement is measured as max |difference| <= tol * scale, where ``scale``
    defaults to 1 (absolute).  The node cap defaults to max(2**14, 8 * len(quad)).
    Returns (value, quadrature used).
    """
    scale = 1.0 if scale is None else scale
    if max_nodes is None:
        max_nodes = max(2**14, 8 * len(quad))
    prev = np.asarray(fn(quad))
    while True:
        nxt_q = quad.doubled()
        if len(nxt_q) > max_nodes:
            raise NonConvergenceError(
                f"no convergence to {tol:g} within {max_nodes} momentum nodes")
        cur = np.asarray(fn(nxt_q))
        if np.max(np.abs(cur - prev), initial=0.0) <= tol * scale:
            return cur, nxt_q
        prev, quad = cur, nxt_q


@dataclass
class TimeIntegral:
    """Result of integrating several channels over the whole time axis."""

    values: np.ndarray  # (nch,) integrals including tails
    tails: np.ndarray  # (nch,) extrapolated contribution beyond the far edges
    core_change: np.ndarray  # (nch,) change of the core integral under panel doubling
    wing_change: np.ndarray  # (nch,) same for the wings
    evaluations: int


def _tail_beyond(t_mid, f_mid, t_far, f_far):
    """Integral of c |t|^-n beyond |t_far| fitted through two samples of one sign."""
    out = np.zeros_like(f_far)
    ok = (f_mid * f_far > 0) & (np.abs(f_far) < np.abs(f_mid))
    n = np.zeros_like(f_far)
    n[ok] = np.log(f_mid[ok] / f_far[ok]) / np.log(abs(t_far) / abs(t_mid))
    good = ok & (n > 1.5)
    out[good] = f_far[good] * abs(t_far) / (n[good] - 1.0)
    # slow or irregular decay: fall back to a crude, deliberately large bound
    bad = ~good & (f_far != 0)
    out[bad] = f_far[bad] * abs(t_far)
    return out


def integrate_time_axis(fn, t_lo: float, t_hi: float, far: float, core_panels: int = 64,
                        order: int = 16, rtol: float = 1e-10, max_core_panels: int = 2**14):
    """Integrate ``fn(t) -> (nch, nt)`` over the real line.

    The core [t_lo, t_hi] uses uniform panels doubled until every channel
    changes by less than ``rtol`` times its magnitude.  Wings out to +-far use
    panels growing geometrically away from the core (each split in two and
    checked against a split in four).  Beyond +-far a power-law tail is
    fitted and added.
    """
    if not (t_lo < t_hi) or far <= max(abs(t_lo), abs(t_hi)):
        raise ValueError("need t_lo < t_hi and far beyond the core")

    def rule(edges):
        nodes, weights = gl_panels(edges, order)
        vals = np.atleast_2d(fn(nodes))
        return vals @ weights, nodes.size

    npan = core_panels
    core, n_eval = rule(np.linspace(t_lo, t_hi, npan + 1))
    while True:
        npan *= 2
        if npan > max_core_panels:
            raise NonConvergenceError("time-axis core integral did not converge")
        nxt, n = rule(np.linspace(t_lo, t_hi, npan + 1))
        n_eval += n
        change = np.abs(nxt - core)
        core = nxt
        if np.all(change <= rtol * np.maximum(np.abs(core), 1e-300)):
            break

    width = t_hi - t_lo

    def wing_edges(start, direction):
        edges = [start]
        step = 0.5 * width
        while abs(edges[-1]) < far or direction * edges[-1] < 0:
            edges.append(edges[-1] + direction * step)
            step *= 2.0
        edges[-1] = direction * far
        return np.array(edges if direction > 0 else edges[::-1])

    wings = []
    for e in (wing_edges(t_lo, -1.0), wing_edges(t_hi, 1.0)):
        fine2 = np.sort(np.concatenate([e, 0.5 * (e[:-1] + e[1:])]))
        fine4 = np.sort(np.concatenate([fine2, 0.5 * (fine2[:-1] + fine2[1:])]))
        a, na = rule(fine2)
        b, nb = rule(fine4)
        n_eval += na + nb
        wings.append((b, np.abs(b - a)))
    wing_val = wings[0][0] + wings[1][0]
    wing_change = wings[0][1] + wings[1][1]

    probes = np.array([-0.5 * far, -far, 0.5 * far, far])
    pv = np.atleast_2d(fn(probes))
    n_eval += probes.size
    tails = (_tail_beyond(-0.5 * far, pv[:, 0], -far, pv[:, 1])
             + _tail_beyond(0.5 * far, pv[:, 2], far, pv[:, 3]))
    return TimeIntegral(core + wing_val + tails, tails, change, wing_change, n_eval)
