import numpy as np
import pytest

from qarrival import _kernels_py, kernels
from qarrival.capscatter import LayeredPotential
from qarrival.wavepacket import FIGURE1, get_packet

compiled = pytest.importorskip("qarrival._kernels")


def test_compiled_backend_selected():
    assert kernels.BACKEND == "compiled"


def test_packet_kernels_agree():
    pk = get_packet(FIGURE1.with_boost(0.0))
    args = (1.4, 0.007, 1.0, -0.22, 1.0, 1.0, pk.cprime)
    x = np.linspace(-1.0, 0.5, 301)
    for t in (0.0, 3e-4, 2e-3):
        for u, v in zip(compiled.packet_eval(x, t, *args), _kernels_py.packet_eval(x, t, *args)):
            np.testing.assert_allclose(u, v, rtol=1e-11, atol=1e-13)


def test_transfer_kernels_agree():
    pot = LayeredPotential(0.01, (-2e4 - 1e-3j, -6e4 - 5e4j, -6e4 - 2.4e5j, 1.1e6 - 1.4e6j))
    p = np.linspace(100.0, 900.0, 257)
    vals, widths, _ = pot.sublayers(p)
    a = compiled.transfer_scatter(vals, widths, p, 1.0, 1.0, True)
    b = _kernels_py.transfer_scatter(vals, widths, p, 1.0, 1.0, True)
    for u, v in zip(a, b):
        np.testing.assert_allclose(u, v, rtol=2e-10, atol=1e-14)
