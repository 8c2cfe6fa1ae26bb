"""Command-line driver: absorber design, time series export and validation.

Exit codes: 0 ok, 1 configuration or input error, 2 design target missed,
3 quadrature nonconvergence, 4 validation failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings

import numpy as np

from . import arrival, capdesign, config, validation
from .capscatter import CapEvolution, LayeredPotential, OverlapWarning
from .quadrature import NonConvergenceError
from .wavepacket import get_packet

logger = logging.getLogger("qarrival")

EXIT_OK, EXIT_CONFIG, EXIT_MISS, EXIT_NONCONVERGENCE, EXIT_VALIDATION = 0, 1, 2, 3, 4

COLUMNS = ("J_free", "J_cap", "dNdt_neg", "Pi_K", "Pi_B", "absJ", "dNdt_neg_shifted")


def _load_config(args):
    cfg = config.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _load_potential(path):
    try:
        return LayeredPotential.load(path)
    except (OSError, ValueError) as exc:
        raise config.ConfigError(f"cannot read potential file {path}: {exc}") from None


def cmd_design(args) -> int:
    cfg = _load_config(args)
    result = capdesign.optimize(cfg.design, seed=cfg.seed)
    pot_path = args.potential or cfg.outputs["potential"]
    report_path = args.out or cfg.outputs["report"]
    result.potential.save(pot_path)
    report = result.report()
    with open(report_path, "w") as fh:
        fh.write(report)
    sys.stdout.write(report)
    logger.info("design finished in %.1f s; potential -> %s, report -> %s",
                result.elapsed, pot_path, report_path)
    if not result.target_met:
        logger.error("design target missed: max survival %.3e >= %g",
                     result.max_survival, cfg.design.target)
        return EXIT_MISS
    return EXIT_OK


def confirm_convergence(ev: CapEvolution, ts, tol: float) -> float:
    """Recompute J(0,t) and the absorption rate with doubled momentum rules.

    Returns the largest change relative to the channel peaks; raises
    NonConvergenceError naming the worst time if it exceeds ``tol``.
    """
    ts = np.asarray(ts, dtype=float)
    levels = [ev.quad.for_window(abs(t), 0.0, ev.units.mass, ev.units.hbar) for t in ts]
    keys = np.array([q.coarse_panels for q in levels])
    change = np.zeros((2, ts.size))
    base = np.zeros((2, ts.size))
    for key in np.unique(keys):
        idx = np.nonzero(keys == key)[0]
        q = levels[idx[0]]
        for k, q_k in enumerate((q, q.doubled())):
            vals = np.stack([ev.flux0(ts[idx], q_k), ev.detector(ts[idx], q_k)[1]])
            if k == 0:
                base[:, idx] = vals
            else:
                change[:, idx] = np.abs(vals - base[:, idx])
    peaks = np.maximum(np.max(np.abs(base), axis=1), 1e-300)
    rel = change / peaks[:, None]
    worst = np.unravel_index(np.argmax(rel), rel.shape)
    if rel[worst] > tol:
        name = ("J_cap", "dNdt_neg")[worst[0]]
        raise NonConvergenceError(f"{name} changed by {rel[worst]:.2e} of its peak under node "
                                  f"doubling at t={ts[worst[1]]:.17g} (tol {tol:g})")
    return float(rel.max())


def simulate(cfg, pot: LayeredPotential) -> arrival.TimeSeries:
    params = cfg.packet
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", OverlapWarning)
        ev = CapEvolution(pot, params, quad=cfg.quad)
    for w in caught:
        logger.warning("%s", w.message)
    t = cfg.t_grid
    change = confirm_convergence(ev, t, cfg.quad_tol)
    stats = ev.statistics()
    tau = stats.dwell
    j_free = get_packet(params).flux(0.0, t)
    _, rate = ev.detector(t)
    _, shifted = ev.detector(t + tau)
    series = arrival.TimeSeries(t, meta={
        "units": "atomic (hbar = m = 1)",
        "packet": (f"alpha={params.alpha!r} delta={params.delta!r} p0={params.p0!r} "
                   f"x0={params.x0!r} b={params.b!r}"),
        "potential_L": repr(pot.length),
        "potential_V": " ".join(f"{v.real!r}{v.imag:+.17g}j" for v in pot.values),
        "tau_D": f"{tau:.17g}",
        "absorbed": f"{stats.absorbed:.17g}",
        "dNdt_neg_shifted": "-dN/dt evaluated at t + tau_D",
        "doubling_change": f"{change:.3e}",
        "seed": str(cfg.seed),
    })
    series.add("J_free", j_free)
    series.add("J_cap", ev.flux0(t))
    series.add("dNdt_neg", rate)
    series.add("Pi_K", arrival.kijowski(params, t, quad=cfg.quad, tol=cfg.quad_tol))
    series.add("Pi_B", arrival.bohm_distribution(params, t))
    series.add("absJ", np.abs(j_free))
    series.add("dNdt_neg_shifted", shifted)
    return series


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    pot = _load_potential(args.potential or cfg.outputs["potential"])
    out = args.out or cfg.outputs["csv"]
    try:
        series = simulate(cfg, pot)
    except NonConvergenceError as exc:
        logger.error("quadrature did not converge: %s", exc)
        return EXIT_NONCONVERGENCE
    with open(out, "w", newline="") as fh:
        series.to_csv(fh)
    logger.info("wrote %d rows to %s (tau_D = %s)", series.t.size, out, series.meta["tau_D"])
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load_config(args)
    skip = set(args.skip or ())
    unknown = skip - set(validation.CHECKS)
    if unknown:
        raise config.ConfigError(f"unknown check(s) for --skip: {', '.join(sorted(unknown))}; "
                                 f"choose from {', '.join(validation.CHECKS)}")
    pot = _load_potential(args.potential) if args.potential else None
    ctx = validation.Context(cfg, pot)
    results = validation.run_checks(ctx, skip)
    table = validation.format_table(results)
    print(table)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(table + "\n")
    failed = [r.name for r in results if r.status == "FAIL"]
    if failed:
        logger.error("failed checks: %s", ", ".join(failed))
        return EXIT_VALIDATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qarrival", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key=value run configuration")
    common.add_argument("--seed", type=int, metavar="N", help="override run.seed")
    common.add_argument("--out", metavar="PATH", help="output file")

    p = sub.add_parser("design", parents=[common], help="optimize a layered absorber")
    p.add_argument("--potential", metavar="PATH", help="where to write the potential")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", parents=[common], help="write the arrival time series CSV")
    p.add_argument("--potential", metavar="PATH", help="potential file to read")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", parents=[common], help="run the invariant checks")
    p.add_argument("--potential", metavar="PATH",
                   help="potential to validate (designed from the config if omitted)")
    p.add_argument("--skip", metavar="CHECK", action="append",
                   help=f"skip a check; one of: {', '.join(validation.CHECKS)}")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors belong to the configuration class
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except config.ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
