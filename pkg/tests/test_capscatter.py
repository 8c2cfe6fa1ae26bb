import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qarrival.capscatter import (CapEvolution, LayeredPotential, OverlapWarning, absorption,
                                 eigenfunction, get_evolution, scatter_amplitudes, solve_scatter,
                                 survival)
from qarrival.wavepacket import FIGURE1, get_packet


@pytest.mark.parametrize("v", [5000.0, 2e5, -3e4 - 4e4j, 1e5 - 2e6j, -1e3 - 1e-3j])
def test_single_barrier_matches_direct_matching(v):
    p = np.array([150.0, 480.0, 733.0])
    r, t = scatter_amplitudes(LayeredPotential(0.01, (v,)), p)
    for i, pi in enumerate(p):
        r_ref, t_ref = oracles.barrier_amplitudes(pi, v, 0.01)
        assert abs(r[i] - r_ref) <= 1e-11 * max(1.0, abs(r_ref))
        assert abs(t[i] - t_ref) <= 1e-11 * max(1.0, abs(t_ref))


def test_real_potential_conserves_flux():
    pot = LayeredPotential(0.02, (3e4, -2e4, 1e5, 0.0))
    s = survival(pot, np.linspace(50.0, 1000.0, 200))
    np.testing.assert_allclose(s, 1.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(re=st.lists(st.floats(-1e5, 1e5), min_size=1, max_size=5),
       im=st.lists(st.floats(1e-3, 1e7), min_size=5, max_size=5))
def test_absorption_in_unit_interval(re, im):
    vals = tuple(complex(a, -b) for a, b in zip(re, im))
    a = absorption(LayeredPotential(0.01, vals), np.linspace(100.0, 900.0, 33))
    assert np.all(a >= -1e-12) and np.all(a <= 1.0 + 1e-12)


def test_splitting_a_layer_changes_nothing():
    one = LayeredPotential(0.01, (-4e4 - 3e5j,))
    two = LayeredPotential(0.01, (-4e4 - 3e5j, -4e4 - 3e5j))
    p = np.linspace(200.0, 800.0, 41)
    for a, b in zip(scatter_amplitudes(one, p), scatter_amplitudes(two, p)):
        np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-15)


def test_eigenfunction_matches_plane_waves_and_is_smooth(designed):
    sol = solve_scatter(designed.potential, 500.0)
    x = np.array([-0.3, -0.01])
    u = eigenfunction(sol, x)
    np.testing.assert_allclose(u, np.exp(500j * x) + sol.R * np.exp(-500j * x), rtol=1e-12)
    right = 0.02
    assert eigenfunction(sol, right) == pytest.approx(sol.T * np.exp(500j * right), rel=1e-10)
    for e in designed.potential.edges:
        lo, dlo = eigenfunction(sol, e - 1e-13, derivative=True)
        hi, dhi = eigenfunction(sol, e + 1e-13, derivative=True)
        assert abs(lo - hi) <= 1e-8 * max(1.0, abs(lo))
        assert abs(dlo - dhi) <= 1e-8 * max(1.0, abs(dlo))
    assert sol.survival + sol.absorption == pytest.approx(1.0)


def test_potential_file_round_trip(tmp_path, designed):
    path = tmp_path / "pot.txt"
    designed.potential.save(path)
    back = LayeredPotential.load(path)
    assert back == designed.potential


@pytest.mark.parametrize("text", ["L 0.01\nN 2\n1 -1\n", "N 1\nL 0.01\n1 -1\n",
                                  "L 0.01\nN 1\n1 -1 3\n", "L 0.01\n"])
def test_malformed_potential_file(text):
    with pytest.raises(ValueError):
        LayeredPotential.loads(text)


def test_source_layer_rejected():
    with pytest.raises(ValueError):
        LayeredPotential(0.01, (1.0 + 1.0j,))


def test_figure1_packet_overlaps_absorber():
    with pytest.warns(OverlapWarning):
        CapEvolution(LayeredPotential.zero(0.01, 4), FIGURE1)


def test_zero_potential_reproduces_free_packet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ev = get_evolution(LayeredPotential.zero(0.01, 4), FIGURE1)
    pk = get_packet(FIGURE1)
    x = np.linspace(-0.5, 0.3, 81)
    for t in (0.0, 4e-4, 1.2e-3):
        assert np.max(np.abs(ev.amplitude_converged(x, t, 1e-12) - pk.amplitude(x, t))) <= 1e-9
    ts = np.linspace(0.0, 1.6e-3, 200)
    np.testing.assert_allclose(ev.flux0(ts), pk.flux(0.0, ts), atol=1e-9 * 5581)


def test_volume_rate_equals_norm_derivative(evolution):
    peak = evolution.statistics().peak_rate
    for t in (4.0e-4, 7.3e-4, 1.1e-3):
        vol, fd = evolution.absorption_rate(t)
        assert abs(vol - fd) <= 1e-6 * peak


def test_norm_partition(evolution):
    n, n_minus, n_plus = evolution.norms(7.3e-4)
    assert n == pytest.approx(n_minus + n_plus)
    assert 0.0 < n < 1.0
    # N(t) + absorbed-so-far is conserved between two times
    t1, t2 = 6.5e-4, 8.0e-4
    ts = np.linspace(t1, t2, 2001)
    _, rate = evolution.detector(ts)
    lost = np.trapezoid(rate, ts)
    assert evolution.norms(t1)[0] - evolution.norms(t2)[0] == pytest.approx(lost, rel=1e-6)
