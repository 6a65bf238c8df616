from __future__ import annotations

import numpy as np
import pytest
from scipy import stats as st

from canyon.stats import EstimateWithCI, batch_means, clopper_pearson, iid_estimate


def test_iid_estimate_matches_numpy():
    x = np.arange(10.0)
    e = iid_estimate(x)
    assert e.mean == pytest.approx(4.5)
    assert e.stderr == pytest.approx(x.std(ddof=1) / np.sqrt(10))
    assert e.method == "plain-iid" and not e.is_lower_bound
    lo, hi = e.interval()
    assert lo < 4.5 < hi


def test_iid_estimate_needs_two_samples():
    with pytest.raises(ValueError):
        iid_estimate([1.0])


def test_batch_means():
    m, se = batch_means([1.0, 3.0])
    assert m == 2.0 and se == pytest.approx(1.0)


def test_censored_estimate_is_lower_bound():
    assert EstimateWithCI(1.0, 0.1, 10, "plain-iid", censored=2).is_lower_bound
    with pytest.raises(ValueError):
        EstimateWithCI(1.0, -0.1, 10, "plain-iid")


def test_clopper_pearson_edges():
    lo, hi = clopper_pearson(0, 10_000)
    assert lo == 0.0
    # the exact upper bound for zero successes is 1 - (alpha/2)^(1/n)
    assert hi == pytest.approx(1 - 0.025 ** (1 / 10_000))
    assert clopper_pearson(10, 10)[1] == 1.0


def test_clopper_pearson_coverage_contains_binomtest():
    ref = st.binomtest(37, 200).proportion_ci(0.95, method="exact")
    lo, hi = clopper_pearson(37, 200)
    assert lo == pytest.approx(ref.low) and hi == pytest.approx(ref.high)
