from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from canyon.criticality import (CONJECTURE_NOTE, CriticalPointError, empirical_growth,
                                estimate_critical_point, estimate_survival,
                                estimate_tail_exponent, growth_bound, running_max_min)
from canyon.engine import P_C, run


def test_growth_bound_value():
    assert growth_bound(2.0) == pytest.approx(0.232544158, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.001, 30.0))
def test_growth_bound_matches_boundary_value(t):
    # the objective has derivative 1 - e^-s >= 0, so the supremum sits at s = 1
    assert growth_bound(t) == pytest.approx(math.exp(-1) - math.exp(-t), abs=1e-12)
    s = np.linspace(0, 1, 1001)
    assert growth_bound(t) >= np.max(np.exp(-s) - math.exp(-t) - (1 - s)) - 1e-12


def test_growth_bound_vanishes_at_one():
    assert growth_bound(1 + 1e-9) == pytest.approx(0.0, abs=1e-8)
    with pytest.raises(ValueError):
        growth_bound(1.0)


def test_empirical_growth_above_bound():
    assert empirical_growth(2.0, 200_000, 1) > growth_bound(2.0) - 0.02


def test_empirical_growth_matches_full_chain_count():
    q = 1 - math.exp(-1.5)
    last = list(run(3, 5000, thresholds=[q], stride=5000))[-1]
    assert empirical_growth(1.5, 5000, 3) == last.counts[0] / 5000


def test_survival_extremes():
    low = estimate_survival(0.3, 10_000, 2000, 0)
    assert low.survivors == 0 and low.ci_low == 0.0
    high = estimate_survival(0.9, 10_000, 2000, 0)
    assert high.ci_low > 0.5
    assert estimate_survival(0.5, 0, 10, 0).survivors == 10


def test_survival_monotone_in_q():
    a = estimate_survival(0.6, 5000, 3000, 2).survivors
    b = estimate_survival(0.65, 5000, 3000, 2).survivors
    c = estimate_survival(0.7, 5000, 3000, 2).survivors
    assert a <= b <= c


def test_critical_point_quick_bracket():
    est = estimate_critical_point(0.5, 0.75, 5, 10_000, 2000, 1)
    assert est.lo < est.hi and est.hi - est.lo == pytest.approx(0.25 / 32)
    assert abs(est.estimate - P_C) < 0.03
    verdicts = {q: v for q, v, _ in est.probes}
    assert verdicts[0.5] == "recurrent" and verdicts[0.75] == "transient"


def test_critical_point_bad_bracket():
    with pytest.raises(CriticalPointError):
        estimate_critical_point(0.7, 0.8, 3, 5000, 1000, 0)
    with pytest.raises(ValueError):
        estimate_critical_point(0.7, 0.6)


def test_critical_point_narrow_bracket_returns_immediately():
    est = estimate_critical_point(0.6, 0.6005, tol=1e-3)
    assert est.probes == [] and est.estimate == pytest.approx(0.60025)


def test_tail_exponent_near_half_at_critical_point():
    fit = estimate_tail_exponent(P_C, 2 ** np.arange(4, 13), 20_000, 3, bootstrap=50)
    assert fit.status == "power-law"
    assert abs(fit.exponent - 0.5) < 0.15
    assert fit.stderr > 0 and fit.note == CONJECTURE_NOTE
    assert "conjecture" in fit.note


def test_tail_status_off_critical():
    with pytest.warns(RuntimeWarning, match="survivors"):
        sub = estimate_tail_exponent(0.3, 2 ** np.arange(2, 12), 5000, 0, bootstrap=0)
    assert sub.status != "power-law"
    sup = estimate_tail_exponent(0.9, 2 ** np.arange(2, 12), 5000, 0, bootstrap=0)
    assert sup.status == "degenerate"


def test_tail_survival_curve_non_increasing():
    fit = estimate_tail_exponent(0.6, [1, 2, 4, 8, 16, 32], 2000, 5, bootstrap=0,
                                 fit_range=(1, 32))
    assert np.all(np.diff(fit.survival) <= 0)
    assert fit.survival[0] == pytest.approx(0.6, abs=0.05)   # P[tau > 1] = q


def test_running_max_min_matches_records():
    recs = list(run(9, 3000))
    expected = max(r.minimum for r in recs if r.k >= 1000)
    assert running_max_min(9, 3000, 1000) == expected
    with pytest.raises(ValueError):
        running_max_min(9, 100, 100)
