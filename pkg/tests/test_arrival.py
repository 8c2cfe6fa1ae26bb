import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from qarrival.arrival import (BRACKEN_MELLOY, TimeSeries, backflow_report, backflow_trajectory,
                              bohm_distribution, bohm_normalization, bohm_trajectory, crossings,
                              density_quantiles, distribution_moments, kijowski,
                              kijowski_boost_residual, kijowski_normalization)
from qarrival.validation import cusp_ratios
from qarrival.wavepacket import FIGURE1

GRID = np.linspace(0.0, 1.6e-3, 4000)
# frozen; endpoints and magnitude confirmed against the mpmath flux below
INTERVAL = (3.980523956439069e-4, 4.0376200373092773e-4)
MAGNITUDE = 1.6833085339237463e-5
FIG = dict(alpha=1.4, delta=0.007, p0=1.0, x0=-0.22, b=300.0)


@pytest.fixture(scope="module")
def report():
    return backflow_report(FIGURE1, GRID)


def test_single_backflow_interval(report):
    assert len(report.intervals) == 1
    assert report.intervals[0] == pytest.approx(INTERVAL, abs=1e-13)
    assert report.magnitudes[0] == pytest.approx(MAGNITUDE, rel=1e-9)
    assert 0 < report.total < BRACKEN_MELLOY and report.within_bound


@pytest.mark.slow
def test_backflow_endpoints_against_mpmath_flux(report):
    for root, sign_before in zip(report.intervals[0], (1, -1)):
        before = oracles.flux(0, root - 2e-12, **FIG)
        after = oracles.flux(0, root + 2e-12, **FIG)
        assert before * sign_before > 0 and after * sign_before < 0


@pytest.mark.slow
def test_backflow_magnitude_against_mpmath_flux(report):
    a, b = report.intervals[0]
    x, w = np.polynomial.legendre.leggauss(8)
    ts = 0.5 * (b - a) * x + 0.5 * (a + b)
    ref = -0.5 * (b - a) * sum(wi * float(oracles.flux(0, ti, **FIG)) for wi, ti in zip(w, ts))
    assert report.magnitudes[0] == pytest.approx(ref, rel=1e-7)


def test_no_backflow_for_large_boost():
    rep = backflow_report(FIGURE1.with_boost(3000.0), np.linspace(0.0, 1.6e-4, 4000))
    assert rep.intervals == []
    assert bohm_normalization(FIGURE1.with_boost(3000.0)) == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("t", [2e-4, 4.0e-4, 7.3e-4, 1.4e-3])
def test_kijowski_against_mpmath(t):
    ref = float(oracles.kijowski(t, **FIG))
    assert kijowski(FIGURE1, t) == pytest.approx(ref, rel=1e-9)


def test_kijowski_normalized_and_positive(report):
    assert kijowski_normalization(FIGURE1) == pytest.approx(1.0, abs=1e-6)
    assert kijowski(FIGURE1, GRID).min() >= 0
    inside = kijowski(FIGURE1, np.linspace(*report.intervals[0], 200))
    assert inside.min() > 0.1
    # smooth across the window: second differences stay small relative to the values
    assert np.max(np.abs(np.diff(inside, 2))) < 1e-3 * inside.max()


def test_kijowski_is_not_boost_covariant():
    """The flux obeys the boost relation; the Kijowski density does not."""
    res = kijowski_boost_residual(FIGURE1, np.array([3e-4, 7e-4]))
    assert np.max(np.abs(res)) > 1e-3


def test_bohm_distribution_cusps(report):
    norm = bohm_normalization(FIGURE1)
    assert norm == pytest.approx(1.0 + 2.0 * MAGNITUDE, rel=1e-8)
    assert max(cusp_ratios(FIGURE1, report)) < 0.01
    assert bohm_distribution(FIGURE1, GRID).min() >= 0


def test_trajectories_do_not_cross():
    starts = density_quantiles(FIGURE1, np.linspace(0.02, 0.98, 15))
    t, x = bohm_trajectory(FIGURE1, starts, (0.0, 1.6e-3), t_eval=GRID[::10])
    assert np.all(np.diff(x, axis=0) > 0)


def test_backflow_trajectory_crosses_three_times():
    x_start, t, x = backflow_trajectory(FIGURE1)
    assert x_start == pytest.approx(-0.12235395670488505, abs=1e-8)
    assert crossings(x) == [1, -1, 1]


def test_flux_mean_time(report):
    series = TimeSeries(GRID)
    from qarrival.wavepacket import get_packet
    series.add("J", get_packet(FIGURE1).flux(0.0, GRID))
    mean, norm = distribution_moments(series, "J", signed=True)
    assert 6e-4 < mean < 9e-4 and 0.9 < norm <= 1.0
    with pytest.raises(ValueError):
        distribution_moments(series, "J")


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 6, elements=st.floats(-1e300, 1e300, allow_subnormal=True)))
def test_csv_round_trip_is_exact(col):
    series = TimeSeries(np.arange(6) * 0.1, {"a": col}, {"tau_D": "1e-5"})
    buf = io.StringIO()
    series.to_csv(buf)
    buf.seek(0)
    back = TimeSeries.read_csv(buf)
    assert np.array_equal(back["a"], col) and np.array_equal(back.t, series.t)
    assert back.meta == {"tau_D": "1e-5"}


def test_time_series_validation():
    with pytest.raises(ValueError):
        TimeSeries(np.array([]))
    with pytest.raises(ValueError):
        TimeSeries(np.array([0.0, 0.0]))
    with pytest.raises(ValueError):
        TimeSeries(np.array([0.0, 1.0]), {"a": np.zeros(3)})
