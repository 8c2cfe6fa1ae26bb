"""Flat key=value run configuration with section prefixes.

Example::

    # Figure-1 packet
    packet.alpha = 1.4
    design.layers = 4
    grid.samples = 4000

Unknown keys, duplicates and unparsable values are rejected with the line
number.  Types follow the defaults below.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .capdesign import DesignSpec
from .oracle import GridSpec
from .quadrature import MomentumQuadrature, packet_quadrature
from .wavepacket import PacketParams

DEFAULTS = {
    "packet.alpha": 1.4,
    "packet.delta": 0.007,
    "packet.p0": 1.0,
    "packet.x0": -0.22,
    "packet.b": 300.0,
    "design.length": 0.01,
    "design.layers": 4,
    "design.p1": 260.0,
    "design.p2": 740.0,
    "design.samples": 49,
    "design.restarts": 30,
    "design.tolerance": 1e-10,
    "design.target": 1e-3,
    "design.check_factor": 10,
    "design.maxiter": 500,
    "grid.t_min": 0.0,
    "grid.t_max": 1.6e-3,
    "grid.samples": 4000,
    "quadrature.fine_panels": 2,
    "quadrature.coarse_panels": 16,
    "quadrature.tol": 1e-8,
    "oracle.x_min": -2.4,
    "oracle.x_max": 0.8,
    "oracle.h": 0.0025,
    "oracle.degree": 8,
    "oracle.dt": 1e-6,
    "oracle.pad": 0.1,
    "oracle.pad_strength": 5e4,
    "oracle.pade": 4,
    "oracle.times": "3e-4,7e-4,1.2e-3",
    "run.seed": 0,
    "output.potential": "potential.txt",
    "output.report": "design_report.txt",
    "output.csv": "timeseries.csv",
}


class ConfigError(ValueError):
    pass


def _convert(key, raw, lineno):
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false"):
                raise ValueError
            return raw.lower() == "true"
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        kind = type(default).__name__
        raise ConfigError(f"line {lineno}: {key} expects {kind}, got {raw!r}") from None


def parse(text: str) -> dict:
    values = dict(DEFAULTS)
    seen = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key=value")
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: {key} already set on line {seen[key]}")
        seen[key] = lineno
        values[key] = _convert(key, raw, lineno)
    return values


@dataclass
class RunConfig:
    packet: PacketParams
    design: DesignSpec
    t_grid: np.ndarray
    quad: MomentumQuadrature
    quad_tol: float
    grid: GridSpec
    oracle_times: tuple
    seed: int
    outputs: dict

    @classmethod
    def from_values(cls, v: dict) -> RunConfig:
        try:
            packet = PacketParams(v["packet.alpha"], v["packet.delta"], v["packet.p0"],
                                  v["packet.x0"], v["packet.b"])
            design = DesignSpec(length=v["design.length"], n_layers=v["design.layers"],
                                p1=v["design.p1"], p2=v["design.p2"], samples=v["design.samples"],
                                max_restarts=v["design.restarts"], tolerance=v["design.tolerance"],
                                target=v["design.target"], check_factor=v["design.check_factor"],
                                maxiter=v["design.maxiter"])
            if v["grid.samples"] < 2:
                raise ValueError("grid.samples must be at least 2")
            if not v["grid.t_max"] > v["grid.t_min"]:
                raise ValueError("grid.t_max must exceed grid.t_min")
            t_grid = np.linspace(v["grid.t_min"], v["grid.t_max"], v["grid.samples"])
            quad = packet_quadrature(packet, fine_panels=v["quadrature.fine_panels"],
                                     coarse_panels=v["quadrature.coarse_panels"])
            grid = GridSpec(v["oracle.x_min"], v["oracle.x_max"], v["oracle.h"],
                            v["oracle.degree"], v["oracle.dt"], v["oracle.pad"],
                            v["oracle.pad_strength"], v["oracle.pade"])
            times = tuple(float(s) for s in v["oracle.times"].split(","))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        outputs = {k.split(".", 1)[1]: v[k] for k in v if k.startswith("output.")}
        return cls(packet, design, t_grid, quad, v["quadrature.tol"], grid, times,
                   v["run.seed"], outputs)


def load(path=None) -> RunConfig:
    if path is None:
        return RunConfig.from_values(dict(DEFAULTS))
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return RunConfig.from_values(parse(text))


def dumps_defaults() -> str:
    return "\n".join(f"{k} = {v}" for k, v in DEFAULTS.items()) + "\n"
