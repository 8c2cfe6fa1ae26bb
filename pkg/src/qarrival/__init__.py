"""Arrival-time simulation with analytic backflow packets and layered absorbers."""
from .arrival import (BRACKEN_MELLOY, BackflowReport, TimeSeries, backflow_report,
                      bohm_distribution, bohm_trajectory, kijowski)
from .capdesign import DesignResult, DesignSpec, optimize
from .capscatter import (CapEvolution, LayeredPotential, OverlapWarning, absorption,
                         scatter_amplitudes, survival)
from .kernels import BACKEND
from .oracle import GridSpec, propagate
from .quadrature import NonConvergenceError
from .specfun import faddeeva_w
from .wavepacket import ATOMIC, FIGURE1, Packet, PacketParams, Units

__version__ = "0.1.0"

__all__ = [
    "ATOMIC", "BACKEND", "BRACKEN_MELLOY", "BackflowReport", "CapEvolution", "DesignResult",
    "DesignSpec", "FIGURE1", "GridSpec", "LayeredPotential", "NonConvergenceError",
    "OverlapWarning", "Packet", "PacketParams", "TimeSeries", "Units", "absorption",
    "backflow_report", "bohm_distribution", "bohm_trajectory", "faddeeva_w", "kijowski",
    "optimize", "propagate", "scatter_amplitudes", "survival",
]
