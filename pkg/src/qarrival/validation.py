"""Invariant checks run by ``qarrival validate``.

Every check returns (passed, detail).  Expensive shared results (the
designed potential, the absorbed evolution, the backflow report) are
computed once per Context.
"""
from __future__ import annotations

import functools
import logging
import time
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import arrival, capdesign, oracle
from .capscatter import LayeredPotential, get_evolution, scatter_amplitudes
from .quadrature import gl_panels
from .specfun import faddeeva_w
from .wavepacket import boost_flux_relation_check, get_packet

logger = logging.getLogger(__name__)

FADDEEVA_TOL = 1e-12
GRADIENT_TOL = 1e-5
FLUX_IDENTITY_TOL = 1e-3
ABSORPTION_FLOOR = 0.999
CROSS_METHOD_TOL = 1e-6
DWELL_IDENTITY_TOL = 0.01
DWELL_REFERENCE = 1.0515e-5
DWELL_BAND = 0.15
NORMALIZATION_TOL = 1e-6
CUSP_RATIO = 0.01
ORACLE_TOL = 1e-6
FREE_ORACLE_TOL = 1e-9
ENDPOINT_TOL = 1e-12


@dataclass
class CheckResult:
    name: str
    status: str  # "pass", "FAIL" or "skipped"
    detail: str
    seconds: float = 0.0


class Context:
    """Shared, lazily computed inputs for the checks."""

    def __init__(self, cfg, potential: LayeredPotential | None = None):
        self.cfg = cfg
        self._potential = potential
        self._design = None

    @property
    def design(self) -> capdesign.DesignResult:
        if self._design is None:
            self._design = capdesign.optimize(self.cfg.design, seed=self.cfg.seed)
        return self._design

    @property
    def potential(self) -> LayeredPotential:
        if self._potential is None:
            self._potential = self.design.potential
        return self._potential

    @property
    def evolution(self):
        return get_evolution(self.potential, self.cfg.packet)

    @functools.cached_property
    def backflow(self) -> arrival.BackflowReport:
        return arrival.backflow_report(self.cfg.packet, self.cfg.t_grid)


def faddeeva_reference():
    """(z, w) from the shipped extended-precision grid."""
    path = resources.files("qarrival").joinpath("data/faddeeva_grid.txt")
    with resources.as_file(path) as p:
        d = np.loadtxt(p)
    return d[:, 0] + 1j * d[:, 1], d[:, 2] + 1j * d[:, 3]


def check_specfun(ctx):
    z, ref = faddeeva_reference()
    err = float(np.max(np.abs(faddeeva_w(z) - ref) / np.abs(ref)))
    return err <= FADDEEVA_TOL, f"max rel err {err:.2e} over {z.size} points"


def gradient_fd_error(pot: LayeredPotential, spec: capdesign.DesignSpec, rel_step=1e-5):
    """Max relative difference of the analytic gradient and central differences."""
    g = capdesign.gradient(pot, spec)
    vals = np.array(pot.values)
    fd = np.empty_like(g)
    for j in range(pot.n):
        for k, unit in enumerate((1.0, 1j)):
            step = rel_step * max(abs(vals[j]), 1.0)
            if k == 1:  # keep Im V <= 0 on both sides of the difference
                step = min(step, 0.1 * abs(vals[j].imag)) or step
            up, dn = vals.copy(), vals.copy()
            up[j] += unit * step
            dn[j] -= unit * step
            f_dn = capdesign.objective(LayeredPotential(pot.length, tuple(dn)), spec)
            if up[j].imag > 0:  # Im V = 0 exactly: one-sided difference
                up[j] = vals[j]
                f_up = capdesign.objective(LayeredPotential(pot.length, tuple(up)), spec)
                fd[j, k] = (f_up - f_dn) / step
            else:
                f_up = capdesign.objective(LayeredPotential(pot.length, tuple(up)), spec)
                fd[j, k] = (f_up - f_dn) / (2.0 * step)
    scale = np.maximum(np.abs(g), 1e-3 * np.max(np.abs(g)))
    return float(np.max(np.abs(g - fd) / scale))


def check_gradient(ctx):
    rng = np.random.default_rng(ctx.cfg.seed)
    spec = ctx.cfg.design
    # generic points: at the optimum the gradient vanishes and a relative
    # comparison only measures rounding in the differences
    worst = 0.0
    for _ in range(5):
        v = rng.uniform(-2e4, 2e4, spec.n_layers) - 1j * 10 ** rng.uniform(2, 5, spec.n_layers)
        worst = max(worst, gradient_fd_error(LayeredPotential(spec.length, tuple(v)), spec))
    return worst <= GRADIENT_TOL, f"max rel diff {worst:.2e} (5 random potentials)"


def check_packet(ctx):
    params = ctx.cfg.packet
    pk = get_packet(params)
    ts = np.linspace(ctx.cfg.t_grid[0], ctx.cfg.t_grid[-1], 41)
    res = float(np.max(np.abs(boost_flux_relation_check(params, ts))))
    peak = float(np.max(np.abs(pk.flux(0.0, ctx.cfg.t_grid))))
    ok = res <= 1e-10 * peak
    return ok, f"boost relation residual {res:.2e} (peak flux {peak:.4g}), norm const {pk.norm:.12g}"


def check_design(ctx):
    if ctx._potential is not None and ctx._design is None:
        s = np.abs(np.array(scatter_amplitudes(ctx.potential, ctx.cfg.design.check_grid()))) ** 2
        worst = float(s.sum(axis=0).max())
    else:
        worst = ctx.design.max_survival
    return worst < ctx.cfg.design.target, (f"max survival {worst:.4e} on check grid "
                                           f"(target {ctx.cfg.design.target:g})")


def check_flux_identity(ctx):
    t = ctx.cfg.t_grid
    j_cap = ctx.evolution.flux0(t)
    j_free = get_packet(ctx.cfg.packet).flux(0.0, t)
    peak = float(j_free.max())
    dev = float(np.max(np.abs(j_cap - j_free))) / peak
    return dev <= FLUX_IDENTITY_TOL, f"sup|J_cap - J_free|/peak = {dev:.3e}"


def check_backflow(ctx):
    rep = ctx.backflow
    if not rep.intervals:
        return False, "no backflow interval on the grid"
    pk = get_packet(ctx.cfg.packet)
    # endpoint accuracy: the flux must change sign within ENDPOINT_TOL of each root
    located = all(pk.flux(0.0, a - ENDPOINT_TOL) * pk.flux(0.0, a + ENDPOINT_TOL) <= 0
                  and pk.flux(0.0, b - ENDPOINT_TOL) * pk.flux(0.0, b + ENDPOINT_TOL) <= 0
                  for a, b in rep.intervals)
    ok = rep.within_bound and located
    mags = ", ".join(f"{m:.4e}" for m in rep.magnitudes)
    return ok, (f"{len(rep.intervals)} interval(s), magnitudes [{mags}] "
                f"(bound {arrival.BRACKEN_MELLOY}), endpoints bracketed: {located}")


def check_emission(ctx):
    rep = ctx.backflow
    if not rep.intervals:
        return False, "no backflow interval"
    ev = ctx.evolution
    a, b = rep.intervals[0]
    samples = a + (b - a) * np.array([0.25, 0.5, 0.75])
    h = 1e-7
    d_minus = []
    for t in samples:
        n = [ev.norms(t + s * h)[1] for s in (-2, -1, 1, 2)]
        d_minus.append((n[0] - 8.0 * n[1] + 8.0 * n[2] - n[3]) / (12.0 * h))
    _, rate = ev.detector(ctx.cfg.t_grid)
    emits = all(d > 0 for d in d_minus)
    absorbs = bool(np.all(rate >= 0))
    return emits and absorbs, (f"dN-/dt at samples {np.array2string(np.array(d_minus), precision=4)}"
                               f", min(-dN/dt) on grid {rate.min():.3e}")


def check_absorption(ctx):
    stats = ctx.evolution.statistics()
    mom = ctx.evolution.momentum_absorbed()
    diff = abs(stats.absorbed - mom)
    ok = stats.absorbed >= ABSORPTION_FLOOR and diff <= CROSS_METHOD_TOL
    return ok, f"absorbed {stats.absorbed:.10f} (time), {mom:.10f} (momentum), diff {diff:.1e}"


def check_dwell(ctx):
    stats = ctx.evolution.statistics()
    delay = stats.mean_rate - stats.mean_flux_cap
    rel = abs(delay - stats.dwell) / stats.dwell
    band = abs(stats.dwell - DWELL_REFERENCE) / DWELL_REFERENCE
    ok = rel <= DWELL_IDENTITY_TOL and band <= DWELL_BAND
    return ok, (f"tau_D {stats.dwell:.6e}, mean delay {delay:.6e}, identity {rel:.2e}, "
                f"vs reference {band:+.1%}")


def check_kijowski(ctx):
    params = ctx.cfg.packet
    norm = arrival.kijowski_normalization(params)
    pik = arrival.kijowski(params, ctx.cfg.t_grid)
    ok = abs(norm - 1.0) <= NORMALIZATION_TOL and bool(np.all(pik >= 0))
    detail = f"integral {norm:.10f}, min on grid {pik.min():.3e}"
    for a, b in ctx.backflow.intervals:
        inside = arrival.kijowski(params, np.linspace(a, b, 101))
        ok = ok and bool(inside.min() > 0)
        detail += f", min over backflow {inside.min():.4g}"
    return ok, detail


def cusp_ratios(params, report: arrival.BackflowReport, units=None):
    """Pi_B at each flux zero over the smaller neighbouring local maximum."""
    kw = {} if units is None else {"units": units}
    out = []
    for a, b in report.intervals:
        w = b - a
        inner = arrival.bohm_distribution(params, np.linspace(a, b, 401), **kw).max()
        for root, outer in ((a, (a - 3 * w, a)), (b, (b, b + 3 * w))):
            side = arrival.bohm_distribution(params, np.linspace(*outer, 401), **kw).max()
            at = float(arrival.bohm_distribution(params, root, **kw))
            out.append(at / min(inner, side))
    return out


def check_bohm(ctx):
    params = ctx.cfg.packet
    if not ctx.backflow.intervals:
        return False, "no backflow interval"
    ratios = cusp_ratios(params, ctx.backflow)
    qs = arrival.density_quantiles(params, np.linspace(0.05, 0.95, 9))
    grid = ctx.cfg.t_grid[::max(1, ctx.cfg.t_grid.size // 400)]
    _, xs = arrival.bohm_trajectory(params, qs, (float(grid[0]), float(grid[-1])), t_eval=grid)
    ordered = bool(np.all(np.diff(xs, axis=0) > 0))
    _, _, x = arrival.backflow_trajectory(params, t_grid=ctx.cfg.t_grid)
    cross = arrival.crossings(x)
    ok = max(ratios) < CUSP_RATIO and ordered and len(cross) == 3
    return ok, (f"max cusp ratio {max(ratios):.1e}, trajectories ordered: {ordered}, "
                f"backflow trajectory crossings {cross}")


def check_quadrature(ctx):
    """Momentum rules pass one doubling at the configured tolerance."""
    tol = ctx.cfg.quad_tol
    ev = ctx.evolution
    params = ctx.cfg.packet
    t_peak = ev.arrival_time()
    ts = np.array([0.5 * t_peak, t_peak, 2.0 * t_peak, ctx.cfg.t_grid[-1]])
    for a, b in ctx.backflow.intervals:
        ts = np.append(ts, 0.5 * (a + b))
    worst = 0.0
    peak_j = float(np.max(np.abs(ev.flux0(ts))))
    peak_r = ev.statistics().peak_rate
    peak_k = float(np.max(arrival.kijowski(params, ts)))
    for t in ts:
        q = ev.quad.for_window(abs(t))
        q2 = q.doubled()
        worst = max(worst, abs(ev.flux0([t], q)[0] - ev.flux0([t], q2)[0]) / peak_j,
                    abs(ev.detector([t], q)[1][0] - ev.detector([t], q2)[1][0]) / peak_r)
        worst = max(worst, abs(arrival.kijowski(params, t, q) - arrival.kijowski(params, t, q2))
                    / peak_k)
    integ = ev.statistics().integral
    t_change = float(np.max((integ.core_change + integ.wing_change)
                            / np.maximum(np.abs(integ.values), 1e-300)))
    ok = worst <= tol and t_change <= 1e-8
    return ok, f"momentum doubling change {worst:.1e} (tol {tol:g}), time-axis change {t_change:.1e}"


def _window_initial(cfg, reference):
    lo, hi = cfg.grid.x_min + cfg.grid.pad, cfg.grid.x_max - cfg.grid.pad

    def initial(x):
        out = np.zeros(x.size, dtype=complex)
        w = oracle.smooth_window(x, lo, hi, 2.0 * cfg.grid.pad)
        m = w > 0
        out[m] = reference(x[m], 0.0) * w[m]
        return out

    return initial


def oracle_errors(cfg, pot: LayeredPotential, reference, region):
    """L2 distance on ``region`` between the grid propagator and ``reference(x, t)``
    at the configured checkpoint times.  The initial state is the reference at
    t = 0 tapered to zero inside the boundary pads."""
    lo, hi = region
    res = oracle.propagate(cfg.grid, pot, _window_initial(cfg, reference), cfg.oracle_times,
                           breakpoints=[lo])
    fem = res.propagator
    errs = [fem.l2_diff(res.states[k], lambda x, t=t: reference(x, t), lo, hi)
            for k, t in enumerate(cfg.oracle_times)]
    return np.array(errs), res


def l2_distance(f, g, lo: float, hi: float, panels: int = 400) -> float:
    x, w = gl_panels(np.linspace(lo, hi, panels + 1), 16)
    return float(np.sqrt(w @ np.abs(f(x) - g(x)) ** 2))


def check_oracle(ctx):
    cfg = ctx.cfg
    region = (-0.5, ctx.potential.length)
    ev = ctx.evolution
    cap, res = oracle_errors(cfg, ctx.potential,
                             lambda x, t: ev.amplitude_converged(x, t, 1e-10), region)
    # free motion: grid propagator and eigenstate expansion against the closed form
    zero = LayeredPotential.zero(ctx.potential.length, ctx.potential.n)
    pk = get_packet(cfg.packet)
    free, _ = oracle_errors(cfg, zero, pk.amplitude, region)
    ev0 = get_evolution(zero, cfg.packet)
    expansion = np.array([l2_distance(lambda x, t=t: ev0.amplitude_converged(x, t, 1e-12),
                                      lambda x, t=t: pk.amplitude(x, t), *region)
                          for t in cfg.oracle_times])
    ok = (cap.max() <= ORACLE_TOL and free.max() <= FREE_ORACLE_TOL
          and expansion.max() <= FREE_ORACLE_TOL)
    fmt = lambda a: np.array2string(a, precision=2)  # noqa: E731
    return ok, (f"absorber {fmt(cap)}, free grid {fmt(free)}, free expansion {fmt(expansion)} "
                f"(L2 on [{region[0]}, {region[1]}]), pad loss {res.pad_loss:.1e}")


CHECKS = {
    "specfun": check_specfun,
    "gradient": check_gradient,
    "packet": check_packet,
    "design": check_design,
    "flux_identity": check_flux_identity,
    "backflow": check_backflow,
    "emission": check_emission,
    "absorption": check_absorption,
    "dwell": check_dwell,
    "kijowski": check_kijowski,
    "bohm": check_bohm,
    "quadrature": check_quadrature,
    "oracle": check_oracle,
}


def run_checks(ctx: Context, skip=()) -> list:
    unknown = set(skip) - set(CHECKS)
    if unknown:
        raise KeyError(f"unknown check(s): {', '.join(sorted(unknown))}")
    results = []
    for name, fn in CHECKS.items():
        if name in skip:
            results.append(CheckResult(name, "skipped", "skipped on request"))
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn(ctx)
        except Exception as exc:  # a crashing check is a failing check
            logger.debug("check %s raised", name, exc_info=True)
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, "pass" if ok else "FAIL", detail,
                                   time.perf_counter() - t0))
    return results


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  status   time(s)  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.status:<7}  {r.seconds:7.1f}  {r.detail}")
    return "\n".join(lines)


def all_passed(results) -> bool:
    return all(r.status != "FAIL" for r in results)


__all__ = ["CHECKS", "CheckResult", "Context", "run_checks", "format_table", "all_passed",
           "faddeeva_reference", "gradient_fd_error", "cusp_ratios", "oracle_errors",
           "l2_distance"]
