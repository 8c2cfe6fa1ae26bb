import math

import numpy as np
import pytest

from qarrival.quadrature import (MomentumQuadrature, NonConvergenceError, converge_by_doubling,
                                 gl_panels, integrate_time_axis, packet_quadrature)
from qarrival.wavepacket import FIGURE1, get_packet


def test_gl_panels_exact_for_polynomials():
    x, w = gl_panels(np.linspace(-1.0, 2.0, 4), 8)
    assert w @ x**15 == pytest.approx((2.0**16 - 1.0) / 16.0, rel=1e-14)


def test_packet_rule_integrates_momentum_density():
    quad = packet_quadrature(FIGURE1)
    dens = get_packet(FIGURE1).momentum_density(quad.nodes)
    assert quad.weights @ dens == pytest.approx(1.0, abs=1e-13)


def test_doubling_and_window_refinement():
    quad = packet_quadrature(FIGURE1)
    d = quad.doubled()
    assert len(d) == 2 * len(quad)
    assert quad.for_window(0.0) is quad
    late = quad.for_window(5e-2)
    assert late.coarse_panels > quad.coarse_panels
    factor = late.coarse_panels // quad.coarse_panels
    assert factor & (factor - 1) == 0  # power of two


def test_invalid_rule_rejected():
    with pytest.raises(ValueError):
        MomentumQuadrature(10.0, 5.0, 20.0, 2, 2)
    with pytest.raises(ValueError):
        MomentumQuadrature(-1.0, 5.0, 20.0, 2, 2)


def test_converge_by_doubling_reaches_tolerance():
    quad = MomentumQuadrature(0.0, 1.0, 40.0, 1, 1, order=8)
    fn = lambda q: q.weights @ np.cos(3.0 * q.nodes)  # noqa: E731
    val, used = converge_by_doubling(fn, quad, 1e-13)
    assert val == pytest.approx(math.sin(120.0) / 3.0, abs=1e-12)
    assert len(used) > len(quad)


def test_converge_by_doubling_raises_when_capped():
    quad = MomentumQuadrature(0.0, 1.0, 40.0, 1, 1, order=4)
    fn = lambda q: q.weights @ np.cos(300.0 * q.nodes)  # noqa: E731
    with pytest.raises(NonConvergenceError):
        converge_by_doubling(fn, quad, 1e-14, max_nodes=64)


def test_time_axis_integral_with_algebraic_tails():
    # int dt / (1 + t^2) = pi, int t^2 / (1 + t^2)^2 dt = pi / 2; the fitted
    # power-law tail is exact only asymptotically, its error falls like far^-3
    fn = lambda t: np.stack([1.0 / (1.0 + t * t), t * t / (1.0 + t * t) ** 2])  # noqa: E731
    res = integrate_time_axis(fn, -2.0, 3.0, 100.0)
    np.testing.assert_allclose(res.values, [math.pi, math.pi / 2], rtol=1e-5)
    assert res.tails[0] == pytest.approx(2.0 / 100.0, rel=1e-3)
    res = integrate_time_axis(fn, -2.0, 3.0, 1000.0)
    np.testing.assert_allclose(res.values, [math.pi, math.pi / 2], rtol=1e-8)


def test_time_axis_integral_gaussian():
    fn = lambda t: np.exp(-t * t)[None, :]  # noqa: E731
    res = integrate_time_axis(fn, -3.0, 3.0, 50.0, rtol=1e-13)
    assert res.values[0] == pytest.approx(math.sqrt(math.pi), rel=1e-12)


def test_time_axis_rejects_bad_window():
    with pytest.raises(ValueError):
        integrate_time_axis(lambda t: t[None, :], 1.0, 0.0, 10.0)
