from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from canyon.engine import P_C, minimum, run, to_exp
from canyon.excursions import (CensoredCycleError, DeltaSymbol, classify_delta,
                               closed_form_delta_densities, closed_form_mean_return,
                               estimate_delta_densities, estimate_mean_return,
                               sample_return_time, sample_return_times,
                               sample_stationary_states, stationary_min_law,
                               stationary_min_uniformity)
from canyon.rng import RngStream


# --- closed forms ---------------------------------------------------------------

@pytest.mark.parametrize("q,expected", [(0.0, 1.0), (0.1, 1.1177687), (0.3, 1.5544241),
                                        (0.5, 3.2588913), (0.6, 11.9461085)])
def test_mean_return_closed_form(q, expected):
    assert closed_form_mean_return(q) == pytest.approx(expected, rel=1e-7)


def test_mean_return_infinite_from_critical_point():
    assert closed_form_mean_return(P_C) == math.inf
    assert closed_form_mean_return(0.9) == math.inf


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 0.999))
def test_delta_densities_form_a_distribution(t):
    d = closed_form_delta_densities(t)
    assert sum(d.as_tuple()) == pytest.approx(1.0)
    assert min(d.as_tuple()) >= 0.0
    assert d.p_plus1 == d.p_minus1


def test_delta_densities_need_t_below_one():
    with pytest.raises(ValueError):
        closed_form_delta_densities(1.0)


@pytest.mark.parametrize("prev,now,sym", [(0, 0, DeltaSymbol.UNDER0), (2, 2, DeltaSymbol.OVER0),
                                          (2, 1, DeltaSymbol.MINUS1), (0, 1, DeltaSymbol.PLUS1)])
def test_classify_delta(prev, now, sym):
    assert classify_delta(prev, now) is sym


def test_classify_delta_rejects_jumps():
    with pytest.raises(ValueError):
        classify_delta(0, 2)
    assert str(DeltaSymbol.UNDER0) == "_0" and str(DeltaSymbol.PLUS1) == "+1"


# --- return times ----------------------------------------------------------------

def test_kernel_excursions_match_python():
    q, seed = 0.5, 17
    tau, peak, cens = sample_return_times(q, 300, seed)
    for i in range(300):
        ex = sample_return_time(RngStream(seed, i), q)
        assert (ex.length, ex.peak_size, ex.censored) == (tau[i], peak[i], cens[i])


def test_first_step_outside_returns_immediately():
    tau, _, _ = sample_return_times(0.0, 50, 1)
    assert np.all(tau == 1)


def test_return_times_thread_independent():
    a = sample_return_times(0.55, 10_000, 8, threads=1)
    b = sample_return_times(0.55, 10_000, 8, threads=4)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_pathwise_monotone_in_cutoff():
    # the smaller cutoff sees the restriction of the larger one
    lo, _, _ = sample_return_times(0.4, 5000, 2)
    hi, _, _ = sample_return_times(0.6, 5000, 2, horizon=10**6)
    assert np.all(lo <= hi)


def test_zero_horizon_censors_everything():
    tau, _, cens = sample_return_times(0.3, 10, 0, horizon=0)
    assert cens.all() and np.all(tau == 0)


def test_censoring_is_flagged():
    with pytest.warns(RuntimeWarning, match="censored"):
        est = estimate_mean_return(0.6, 2000, 0, horizon=5)
    assert est.is_lower_bound and est.censored > 0


def test_supercritical_mean_warns():
    with pytest.warns(RuntimeWarning):
        estimate_mean_return(0.7, 100, 0, horizon=1000)


def test_mean_return_small_sample():
    est = estimate_mean_return(0.3, 50_000, 5)
    assert abs(est.mean - closed_form_mean_return(0.3)) < 4 * est.stderr


@pytest.mark.parametrize("q", [-0.1, 1.0])
def test_mean_return_rejects_bad_q(q):
    with pytest.raises(ValueError):
        estimate_mean_return(q, 10, 0)


# --- delta densities -------------------------------------------------------------

def test_symbol_balance_equals_final_count():
    """#(+1) - #(-1) over a run from empty equals the final threshold count."""
    ts = [0.3, 0.7]
    qgrid = [1 - math.exp(-t) for t in ts]
    steps = 20_000
    dens = estimate_delta_densities(ts, steps, 0, 6, batches=4)
    final = list(run(6, steps, thresholds=qgrid, stride=steps))[-1].counts
    for d, f in zip(dens, final):
        c = d.counts
        assert sum(c) == steps
        assert c[DeltaSymbol.PLUS1] - c[DeltaSymbol.MINUS1] == f


def test_delta_density_estimates_close():
    d = estimate_delta_densities([0.5], 10**6, 10**5, 1)[0]
    cf = closed_form_delta_densities(0.5).as_tuple()
    assert np.allclose(d.as_tuple(), cf, atol=0.01)
    assert all(se > 0 for se in d.stderr)


def test_delta_density_rejects_t_at_one():
    with pytest.raises(ValueError):
        estimate_delta_densities([0.5, 1.0], 10, 0, 0)


# --- stationary sampling ---------------------------------------------------------

def test_stationary_kernel_matches_python_generator():
    q, cycles, seed = 0.5, 400, 12
    law = stationary_min_law(q, None, seed, cycles=cycles)
    states = list(sample_stationary_states(q, cycles, seed))
    assert law.states == len(states)
    assert law.cycles == sum(1 for s in states if not len(s)) == cycles
    mins = np.array([minimum(s) for s in states])
    qgrid = -np.expm1(-law.s_grid)
    expected = np.array([(mins > g).mean() for g in qgrid])
    np.testing.assert_allclose(law.tail, expected, rtol=0, atol=1e-12)


def test_stationary_law_rough_uniformity():
    law = stationary_min_law(1 - math.exp(-0.5), 200_000, 4)
    assert law.states >= 200_000
    assert law.deviation < 0.02
    assert law.empty_fraction == pytest.approx(0.5, abs=0.02)
    assert law.t_plus == pytest.approx(0.5)
    assert law.tail[0] == 1.0


def test_stationary_uniformity_wrapper():
    assert stationary_min_uniformity(0.3, 50_000, 1) < 0.03


def test_stationary_threads_identical():
    a = stationary_min_law(0.5, None, 3, cycles=20_000, threads=1)
    b = stationary_min_law(0.5, None, 3, cycles=20_000, threads=3)
    assert a.states == b.states and np.array_equal(a.tail, b.tail)


def test_censored_cycles_raise():
    with pytest.raises(CensoredCycleError):
        stationary_min_law(0.5, None, 0, cycles=1000, horizon=2)
    with pytest.raises(CensoredCycleError):
        list(sample_stationary_states(0.5, 1000, 0, horizon=2))


def test_stationary_preconditions():
    with pytest.raises(ValueError):
        stationary_min_law(0.7, 100, 0)
    with pytest.raises(ValueError):
        stationary_min_law(0.5, 100, 0, cycles=10)
    with pytest.raises(ValueError):
        stationary_min_law(0.5, None, 0)
    assert to_exp(0.5) == pytest.approx(math.log(2))
