"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py --repeat 5
"""
import argparse
import timeit

import numpy as np

from qarrival import _kernels_py
from qarrival.capscatter import LayeredPotential
from qarrival.wavepacket import FIGURE1, get_packet

try:
    from qarrival import _kernels as compiled
except ImportError:
    compiled = None


def cases(n_x: int, n_p: int):
    pk = get_packet(FIGURE1.with_boost(0.0))
    x = np.linspace(-1.0, 0.5, n_x)
    packet_args = (x, 7.3e-4, 1.4, 0.007, 1.0, -0.22, 1.0, 1.0, pk.cprime)
    pot = LayeredPotential(0.01, (-2.3e4 - 1e-3j, -6.3e4 - 5.1e4j, -6.1e4 - 2.4e5j,
                                  1.1e6 - 1.4e6j))
    p = np.linspace(260.0, 740.0, n_p)
    vals, widths, _ = pot.sublayers(p)
    return {
        "packet_eval": lambda mod: mod.packet_eval(*packet_args),
        "transfer_scatter": lambda mod: mod.transfer_scatter(vals, widths, p, 1.0, 1.0, False),
        "transfer_scatter+grad": lambda mod: mod.transfer_scatter(vals, widths, p, 1.0, 1.0, True),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, default=20000, help="x points for packet_eval")
    ap.add_argument("--momenta", type=int, default=2000, help="momenta for transfer_scatter")
    args = ap.parse_args()
    if compiled is None:
        raise SystemExit("compiled extension not built; run pip install -e . first")
    print(f"{'kernel':<24}{'numpy (ms)':>12}{'compiled (ms)':>15}{'speedup':>10}")
    for name, fn in cases(args.points, args.momenta).items():
        times = []
        for mod in (_kernels_py, compiled):
            fn(mod)  # warm up
            best = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
            times.append(best * 1e3)
        print(f"{name:<24}{times[0]:>12.2f}{times[1]:>15.2f}{times[0] / times[1]:>10.2f}")


if __name__ == "__main__":
    main()
