"""Interval estimates used by the Monte Carlo estimators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as _st


@dataclass(frozen=True)
class EstimateWithCI:
    """A Monte Carlo mean with its standard error.

    ``method`` is ``"plain-iid"`` or ``"batch-means"``.  When ``censored``
    is non-zero the mean is only a lower bound.
    """

    mean: float
    stderr: float
    n: int
    method: str
    censored: int = 0

    def __post_init__(self):
        if self.stderr < 0 or self.n < 1:
            raise ValueError("stderr must be >= 0 and n >= 1")

    @property
    def is_lower_bound(self) -> bool:
        return self.censored > 0

    def interval(self, z: float = 1.96) -> tuple[float, float]:
        return self.mean - z * self.stderr, self.mean + z * self.stderr


def iid_estimate(x) -> EstimateWithCI:
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError("need at least two samples")
    return EstimateWithCI(float(x.mean()), float(x.std(ddof=1) / np.sqrt(n)), n, "plain-iid")


def batch_means(values) -> tuple[float, float]:
    """Mean and standard error from per-batch averages."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval for ``k`` successes out of ``n``."""
    if n <= 0:
        return 0.0, 1.0
    a = (1.0 - level) / 2.0
    lo = 0.0 if k == 0 else float(_st.beta.ppf(a, k, n - k + 1))
    hi = 1.0 if k == n else float(_st.beta.ppf(1.0 - a, k + 1, n - k))
    return lo, hi
