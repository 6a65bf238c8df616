"""Recurrence/transience diagnostics around the critical point.

Survival is observed at a finite horizon: an excursion "survives" when it
has not returned to the empty state after ``horizon`` steps.  This is a
proxy for never returning; near the critical point it overstates survival,
and the bias shrinks as the horizon grows.

Every probe with the same seed reuses the same replica streams, so the
survival indicator is pathwise monotone in ``q``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int, check_nonneg_real, check_seed, check_unit
from .engine import CHUNK, P_C, FullChain, RestrictedChain, from_exp
from .excursions import sample_return_times
from .stats import clopper_pearson

SURVIVAL_THRESHOLD = 1e-3
POWER_LAW_R2 = 0.99
DEGENERATE_EXPONENT = 0.05
CONJECTURE_NOTE = ("conjecture check: k^(-1/2) decay of the return-time tail at the "
                   "critical point is supported numerically but unproven")


class CriticalPointError(RuntimeError):
    """The initial bracket does not straddle the transition."""


@dataclass(frozen=True)
class SurvivalEstimate:
    q: float
    horizon: int
    replicas: int
    survivors: int
    surviving_fraction: float
    ci_low: float
    ci_high: float

    @property
    def ci_halfwidth(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0


def estimate_survival(q: float, horizon: int, replicas: int, seed: int, *,
                      level: float = 0.95, threads: int | None = None) -> SurvivalEstimate:
    """Fraction of excursions from empty still alive after ``horizon`` steps.

    The interval is the exact (Clopper-Pearson) binomial interval.
    """
    q = check_unit(q, "q")
    horizon = check_int(horizon, "horizon")
    replicas = check_int(replicas, "replicas", minimum=1)
    _, _, cens = sample_return_times(q, replicas, seed, horizon, threads=threads)
    k = int(cens.sum())
    lo, hi = clopper_pearson(k, replicas, level)
    return SurvivalEstimate(q, horizon, replicas, k, k / replicas, lo, hi)


@dataclass(frozen=True)
class CriticalPointEstimate:
    lo: float
    hi: float
    replicas_per_probe: int
    horizon: int
    probes: list[tuple[float, str, SurvivalEstimate | None]] = field(default_factory=list)

    @property
    def estimate(self) -> float:
        return (self.lo + self.hi) / 2.0


def _classify(q, horizon, replicas, seed, threshold, threads):
    """``("recurrent" | "transient", estimate)`` for one probe.

    An undecided probe is re-run once with twice the replicas; if it is
    still undecided the point estimate is compared with the threshold.
    """
    est = None
    for reps in (replicas, 2 * replicas):
        est = estimate_survival(q, horizon, reps, seed, threads=threads)
        if est.ci_high < threshold:
            return "recurrent", est
        if est.ci_low > threshold:
            return "transient", est
    return ("transient" if est.surviving_fraction >= threshold else "recurrent"), est


def estimate_critical_point(lo: float = 0.5, hi: float = 0.75, probes: int = 10,
                            horizon: int = 10**5, replicas: int = 10**4, seed: int = 0, *,
                            tol: float = 1e-3, threshold: float = SURVIVAL_THRESHOLD,
                            threads: int | None = None) -> CriticalPointEstimate:
    """Bisect on "survival interval excludes the threshold" between ``lo`` and ``hi``."""
    lo = check_unit(lo, "lo")
    hi = check_unit(hi, "hi")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got {lo}, {hi}")
    probes = check_int(probes, "probes")
    history: list = []
    if hi - lo <= tol:
        return CriticalPointEstimate(lo, hi, replicas, horizon, history)

    for q, want in ((lo, "recurrent"), (hi, "transient")):
        verdict, est = _classify(q, horizon, replicas, seed, threshold, threads)
        history.append((q, verdict, est))
        if verdict != want:
            raise CriticalPointError(
                f"bracket end q={q} looks {verdict} (survival {est.surviving_fraction:.3g}, "
                f"CI [{est.ci_low:.3g}, {est.ci_high:.3g}]); widen the bracket")
    for _ in range(probes):
        if hi - lo <= tol:
            break
        mid = (lo + hi) / 2.0
        verdict, est = _classify(mid, horizon, replicas, seed, threshold, threads)
        history.append((mid, verdict, est))
        if verdict == "transient":
            hi = mid
        else:
            lo = mid
    return CriticalPointEstimate(lo, hi, replicas, horizon, history)


@dataclass(frozen=True)
class TailFit:
    """Log-log fit of ``P[tau > k]`` against ``k``.

    ``exponent`` is minus the fitted slope; ``status`` is ``"power-law"``,
    ``"non-power-law"`` or ``"degenerate"``.
    """

    q: float
    exponent: float
    stderr: float
    k_range: tuple[int, int]
    fit_quality: float
    status: str
    k: np.ndarray
    survival: np.ndarray
    replicas: int
    note: str = CONJECTURE_NOTE


def _loglog_fit(k, s):
    x, y = np.log(k), np.log(s)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return -float(slope), r2


def estimate_tail_exponent(q: float = P_C, k_grid=None, replicas: int = 10**5, seed: int = 0,
                           *, fit_range: tuple[int, int] | None = None, min_survivors: int = 10,
                           bootstrap: int = 200, threads: int | None = None) -> TailFit:
    """Fit the return-time tail exponent from excursions censored at ``max(k_grid)``.

    By default the fit ignores grid points below ``10 * k_grid[0]`` (the
    smallest decade, where the tail is not yet in its asymptotic regime);
    ``fit_range`` overrides this.  Grid points with fewer than
    ``min_survivors`` surviving excursions are dropped with a warning.
    The standard error comes from a multinomial bootstrap over replicas.
    """
    q = check_unit(q, "q")
    if k_grid is None:
        k_grid = 2 ** np.arange(6, 19)
    k_grid = np.unique(np.asarray(k_grid, dtype=np.int64))
    if k_grid.size < 2 or k_grid[0] < 1:
        raise ValueError("k_grid needs at least two positive values")
    replicas = check_int(replicas, "replicas", minimum=1)
    lo_k, hi_k = fit_range if fit_range is not None else (10 * int(k_grid[0]), int(k_grid[-1]))

    tau, _, cens = sample_return_times(q, replicas, seed, int(k_grid[-1]), threads=threads)
    # level[i] = number of grid points k with tau_i > k
    level = np.where(cens, k_grid.size, np.searchsorted(k_grid, tau, side="left"))
    hist = np.bincount(level, minlength=k_grid.size + 1)
    alive = np.cumsum(hist[::-1])[::-1][1:]          # alive[j] = #{tau > k_grid[j]}
    survival = alive / replicas

    in_range = (k_grid >= lo_k) & (k_grid <= hi_k)
    usable = in_range & (alive >= min_survivors)
    if np.any(in_range & ~usable):
        warnings.warn(f"fewer than {min_survivors} survivors at the largest k; grid truncated",
                      RuntimeWarning, stacklevel=2)
    idx = np.flatnonzero(usable)
    if idx.size < 3:
        return TailFit(q, math.nan, math.nan, (lo_k, hi_k), 0.0, "non-power-law",
                       k_grid, survival, replicas)

    kk = k_grid[idx]
    exponent, r2 = _loglog_fit(kk, survival[idx])
    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(bootstrap):
        h = rng.multinomial(replicas, hist / replicas)
        a = np.cumsum(h[::-1])[::-1][1:][idx]
        if np.all(a > 0):
            boots.append(_loglog_fit(kk, a / replicas)[0])
    stderr = float(np.std(boots, ddof=1)) if len(boots) > 1 else math.nan

    if exponent < DEGENERATE_EXPONENT:
        status = "degenerate"
    elif r2 < POWER_LAW_R2:
        status = "non-power-law"
    else:
        status = "power-law"
    return TailFit(q, exponent, stderr, (int(kk[0]), int(kk[-1])), r2, status,
                   k_grid, survival, replicas)


def growth_bound(t: float, grid_step: float = 1e-6) -> float:
    """Lower bound on the linear growth rate of the count left of ``t`` (> 1).

    The supremum over ``s`` in [0, 1) of ``(e^-s - e^-t) - (1 - s)``,
    evaluated on a grid of spacing ``grid_step`` together with its limit
    at ``s -> 1``.
    """
    t = check_nonneg_real(t, "t")
    if t <= 1.0:
        raise ValueError(f"the growth bound needs t > 1, got {t}")
    s = np.append(np.arange(0.0, 1.0, grid_step), 1.0)
    vals = (np.exp(-s) - math.exp(-t)) - (1.0 - s)
    return float(vals.max())


def empirical_growth(t: float, n: int, seed: int, *, replica: int = 0) -> float:
    """``F_t(n) / n`` for the chain started empty, via the restricted chain at ``t``."""
    t = check_nonneg_real(t, "t")
    n = check_int(n, "n", minimum=1)
    chain = RestrictedChain(from_exp(t), check_seed(seed), replica)
    done = 0
    while done < n:
        m = min(CHUNK, n - done)
        chain.advance(m)
        done += m
    return chain.size / n


def running_max_min(seed: int, steps: int, window_start: int, *, replica: int = 0) -> float:
    """Largest full-chain minimum ``M_k`` over ``window_start <= k <= steps``."""
    steps = check_int(steps, "steps", minimum=1)
    window_start = check_int(window_start, "window_start")
    if window_start >= steps:
        raise ValueError("window_start must be < steps")
    chain = FullChain(check_seed(seed), replica)
    winmax = 1.0 if window_start == 0 else -1.0
    done = 0
    while done < steps:
        m = min(CHUNK, steps - done)
        *_, winmax = chain.advance(m, win_start=window_start, winmax=winmax)
        done += m
    return float(winmax)
