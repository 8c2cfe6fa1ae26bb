import numpy as np
import pytest

from qarrival.capscatter import LayeredPotential
from qarrival.oracle import (FemPropagator, GridSpec, pade_roots, propagate, read_checkpoint,
                             smooth_window, write_checkpoint)


def gaussian(x, t, s=0.05, k0=200.0, x0=-0.3):
    """Closed-form free Gaussian, hbar = m = 1."""
    st = s * s * (1 + 1j * t / (2 * s * s))
    return ((2 * np.pi) ** -0.25 * np.sqrt(s / st)
            * np.exp(-(x - x0 - k0 * t) ** 2 / (4 * st) + 1j * k0 * x - 0.5j * k0 * k0 * t))


SMALL = GridSpec(-1.0, 0.5, h=0.005, dt=2e-6, pad=0.05)


def test_free_gaussian_matches_closed_form():
    res = propagate(SMALL, LayeredPotential.zero(0.01, 4), lambda x: gaussian(x, 0.0), [5e-4])
    err = res.propagator.l2_diff(res.states[0], lambda x: gaussian(x, 5e-4), -1.0, 0.5)
    assert err <= 1e-7
    assert res.norms[0] == pytest.approx(1.0, abs=1e-10)


def test_real_potential_conserves_norm():
    pot = LayeredPotential(0.01, (2e4, -1e4, 5e3, 0.0))
    grid = GridSpec(-1.0, 0.5, h=0.005, dt=2e-6, pad=0.05, pad_strength=0.0)
    res = propagate(grid, pot, lambda x: gaussian(x, 0.0), [2e-4, 1e-3, 2e-3])
    np.testing.assert_allclose(res.norms, res.propagator.norm(res.propagator.project(
        lambda x: gaussian(x, 0.0))), rtol=0, atol=1e-10)


ABSORBER = LayeredPotential(0.01, (-2e4 - 1e-3j, -6e4 - 5e4j, -6e4 - 2.4e5j, 1.1e6 - 1.4e6j))


def test_absorber_rate_matches_norm_derivative():
    """-dN/dt from norms on a fine sub-step grid equals the volume formula."""
    grid = GridSpec(-0.8, 0.3, h=0.0025, dt=1e-6, pad=0.05)
    fine = GridSpec(-0.8, 0.3, h=0.0025, dt=1e-9, pad=0.05)
    coarse_fem, fine_fem = FemPropagator(grid, ABSORBER), FemPropagator(fine, ABSORBER)
    c0 = coarse_fem.project(lambda x: gaussian(x, 0.0, x0=-0.2))
    res = coarse_fem.run(c0, [8e-4, 1e-3, 1.2e-3])
    worst, peak = 0.0, 0.0
    for c in res.states:
        cs = [c]
        for _ in range(4):
            cs.append(fine_fem.step(cs[-1]))
        n = [fine_fem.norm(v) for v in cs]
        deriv = -(n[0] - 8 * n[1] + 8 * n[3] - n[4]) / (12 * fine.dt)
        rate = fine_fem.absorber_rate(cs[2]) + fine_fem.pad_rate(cs[2])
        worst = max(worst, abs(deriv - rate))
        peak = max(peak, rate)
    assert peak > 100.0  # the packet is at the absorber
    assert worst <= 1e-6 * peak


def test_step_halving_converged():
    grid = GridSpec(-1.0, 0.5, h=0.0025, dt=1e-6, pad=0.05)
    coarse = propagate(grid, ABSORBER, lambda x: gaussian(x, 0.0), [1.3e-3])
    fine = propagate(grid.halved(), ABSORBER, lambda x: gaussian(x, 0.0), [1.3e-3])
    diff = coarse.propagator.l2_diff(coarse.states[0], lambda x: fine.evaluate(0, x), -1.0, 0.5)
    assert diff < 1e-7


def test_pade_roots():
    assert pade_roots(1) == pytest.approx([-2.0])
    r = pade_roots(4)
    assert len(r) == 4
    # numerator of the (m, m) approximant: product over (1 - z / r_k)
    z = 0.3j
    num = np.prod(1 - z / r)
    den = np.prod(1 + z / r)
    assert num / den == pytest.approx(np.exp(z), rel=1e-12)


def test_grid_validation_and_resolution():
    with pytest.raises(ValueError):
        GridSpec(1.0, 0.0)
    with pytest.raises(ValueError):
        GridSpec(-0.1, 0.1, pad=0.1)
    g = GridSpec()
    assert g.resolves(1100.0)
    assert not GridSpec(h=0.05).resolves(1100.0)


def test_times_must_be_step_multiples():
    fem = FemPropagator(SMALL, LayeredPotential.zero(0.01, 1))
    c = fem.project(lambda x: gaussian(x, 0.0))
    with pytest.raises(ValueError):
        fem.run(c, [3.3e-6])


def test_checkpoint_round_trip(tmp_path):
    x = np.linspace(-1.0, 1.0, 7)
    psi = np.exp(1j * x) / 3.0
    write_checkpoint(tmp_path / "c.txt", x, psi)
    x2, psi2 = read_checkpoint(tmp_path / "c.txt")
    assert np.array_equal(x, x2) and np.array_equal(psi, psi2)
    first = (tmp_path / "c.txt").read_text().splitlines()[0].split()
    assert len(first) == 3


def test_smooth_window():
    x = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    w = smooth_window(x, 0.0, 1.0, 0.25)
    assert list(w) == [0.0, 0.0, 1.0, 0.0, 0.0]
