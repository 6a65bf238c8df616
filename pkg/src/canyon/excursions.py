"""Return times, delta-symbol densities and regenerative sampling.

Excursion ``i`` of master seed ``s`` always uses replica stream ``i``, so
excursion functionals are reproducible, thread-count independent and
pathwise coupled across cutoffs (a smaller cutoff never returns later).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, Sequence

import numpy as np

from . import _kernels as K
from ._parallel import BLOCK, blocks, map_ordered, resolve_threads
from ._validation import check_int, check_nonneg_real, check_seed, check_unit
from .engine import (CHUNK, P_C, FullChain, RestrictedConfig,
                     sample_restricted_arrival, step_restricted, to_exp)
from .rng import RngStream
from .stats import EstimateWithCI, batch_means, iid_estimate

DEFAULT_HORIZON = 10**8
DEFAULT_BATCHES = 30
MIN_LAW_GRID = 100


class CensoredCycleError(RuntimeError):
    """A regeneration cycle did not close within the horizon."""


class DeltaSymbol(IntEnum):
    UNDER0 = K.UNDER0
    OVER0 = K.OVER0
    MINUS1 = K.MINUS1
    PLUS1 = K.PLUS1

    def __str__(self) -> str:
        return {0: "_0", 1: "^0", 2: "-1", 3: "+1"}[int(self)]


def classify_delta(f_prev: int, f_now: int) -> DeltaSymbol:
    """Classify a threshold-count increment into one of the four symbols."""
    if abs(f_now - f_prev) > 1 or f_prev < 0 or f_now < 0:
        raise ValueError(f"corrupted count stream: {f_prev} -> {f_now}")
    return DeltaSymbol(K.classify_code(f_prev, f_now))


@dataclass(frozen=True)
class DeltaDensities:
    """Probabilities of the symbols _0, ^0, -1, +1 at level ``t``."""

    t: float
    p_under0: float
    p_over0: float
    p_minus1: float
    p_plus1: float
    stderr: tuple[float, float, float, float] | None = None
    counts: tuple[int, int, int, int] | None = None

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.p_under0, self.p_over0, self.p_minus1, self.p_plus1


@dataclass(frozen=True)
class ExcursionSample:
    length: int
    peak_size: int
    censored: bool = False


# --- closed forms -------------------------------------------------------------

def closed_form_mean_return(q: float) -> float:
    """Expected return time to the empty set; ``inf`` from the critical point on."""
    q = check_unit(q, "q")
    denom = 1.0 + math.log1p(-q)
    if denom <= 0.0:
        return math.inf
    return 1.0 / denom


def closed_form_delta_densities(t: float) -> DeltaDensities:
    t = check_nonneg_real(t, "t")
    if t >= 1.0:
        raise ValueError(f"delta densities are stationary only for t < 1, got t={t}")
    e = math.exp(-t)
    return DeltaDensities(t, (1.0 - t) * e, 1.0 - (1.0 + t) * e, t * e, t * e)


# --- return times -------------------------------------------------------------

def sample_return_time(rng: RngStream, q: float, horizon: int = DEFAULT_HORIZON) -> ExcursionSample:
    """Run the restricted chain from empty until it is empty again.

    Step-level reference implementation; :func:`sample_return_times` is the
    compiled equivalent and produces the same excursion for replica ``i``
    when given ``RngStream(seed, i)``.
    """
    q = check_unit(q, "q")
    horizon = check_int(horizon, "horizon", minimum=1)
    cfg = RestrictedConfig(q)
    peak = 0
    for k in range(1, horizon + 1):
        step_restricted(cfg, sample_restricted_arrival(rng, q))
        peak = max(peak, len(cfg))
        if not len(cfg):
            return ExcursionSample(k, peak)
    return ExcursionSample(horizon, peak, True)


def sample_return_times(q: float, n: int, seed: int, horizon: int = DEFAULT_HORIZON,
                        *, first: int = 0, threads: int | None = None):
    """Return-time samples for replicas ``first .. first+n-1``.

    Returns arrays ``(tau, peak, censored)``.  ``horizon`` may be 0, in
    which case nothing is simulated and every sample counts as censored.
    """
    q = check_unit(q, "q")
    n = check_int(n, "n", minimum=0)
    seed = check_seed(seed)
    horizon = check_int(horizon, "horizon", minimum=0)
    tau = np.zeros(n, dtype=np.int64)
    peak = np.zeros(n, dtype=np.int64)
    cens = np.zeros(n, dtype=np.bool_)
    useed = np.uint64(seed)

    def work(start, count):
        sl = slice(start, start + count)
        K.excursion_block(useed, first + start, q, horizon, tau[sl], peak[sl], cens[sl])

    map_ordered(work, blocks(n), threads)
    return tau, peak, cens


def estimate_mean_return(q: float, n: int, seed: int, horizon: int = DEFAULT_HORIZON,
                         *, threads: int | None = None) -> EstimateWithCI:
    """Mean return time from ``n`` i.i.d. excursions, with plain standard error."""
    q = check_unit(q, "q")
    n = check_int(n, "n", minimum=2)
    if q >= P_C:
        warnings.warn(f"q={q} is not below the critical point; the mean return time is infinite",
                      RuntimeWarning, stacklevel=2)
    tau, _, cens = sample_return_times(q, n, seed, horizon, threads=threads)
    est = iid_estimate(tau)
    nc = int(cens.sum())
    if nc:
        warnings.warn(f"{nc} excursions censored at horizon {horizon}; mean is a lower bound",
                      RuntimeWarning, stacklevel=2)
        est = EstimateWithCI(est.mean, est.stderr, est.n, est.method, nc)
    return est


# --- delta densities ----------------------------------------------------------

def estimate_delta_densities(t_grid: Sequence[float], steps: int, burnin: int, seed: int,
                             *, batches: int = DEFAULT_BATCHES) -> list[DeltaDensities]:
    """Symbol frequencies of the full chain started empty, after burn-in.

    Frequencies are taken over ``steps`` steps following ``burnin`` steps;
    standard errors come from ``batches`` equal batch means.
    """
    ts = np.array([check_nonneg_real(t, "t") for t in t_grid], dtype=np.float64)
    if ts.size == 0:
        raise ValueError("empty t grid")
    if np.any(ts >= 1.0):
        raise ValueError("every t must be < 1")
    steps = check_int(steps, "steps", minimum=1)
    burnin = check_int(burnin, "burnin")
    batches = check_int(batches, "batches", minimum=1)
    batches = min(batches, steps)

    uniq, inverse = np.unique(ts, return_inverse=True)
    qgrid = -np.expm1(-uniq)
    chain = FullChain(seed, 0, qgrid)
    done = 0
    while done < burnin:
        n = min(CHUNK, burnin - done)
        chain.advance(n)
        done += n

    sizes = np.full(batches, steps // batches, dtype=np.int64)
    sizes[: steps % batches] += 1
    per_batch = np.zeros((batches, uniq.size, 4), dtype=np.int64)
    for b, bsteps in enumerate(sizes):
        done = 0
        while done < bsteps:
            n = int(min(CHUNK, bsteps - done))
            chain.advance(n, tally=per_batch[b])
            done += n

    total = per_batch.sum(axis=0)
    freqs = per_batch / sizes[:, None, None]
    out = []
    for i, t in zip(inverse, ts):
        err = tuple(batch_means(freqs[:, i, s])[1] for s in range(4))
        p = total[i] / steps
        out.append(DeltaDensities(float(t), *map(float, p), stderr=err,
                                  counts=tuple(int(c) for c in total[i])))
    return out


# --- regenerative sampling ----------------------------------------------------

def sample_stationary_states(q: float, cycles: int, seed: int,
                             horizon: int = DEFAULT_HORIZON) -> Iterator[RestrictedConfig]:
    """Yield every state visited by ``cycles`` complete excursions from empty.

    Each cycle contributes its empty starting state and the states it
    passes through before closing.  The empirical law of the stream
    estimates the invariant law of the restricted chain.  Cycle ``c`` uses
    replica stream ``c``.
    """
    q = check_unit(q, "q")
    cycles = check_int(cycles, "cycles", minimum=1)
    seed = check_seed(seed)
    if q >= P_C:
        warnings.warn(f"q={q} is not below the critical point; cycles may not close",
                      RuntimeWarning, stacklevel=2)
    for c in range(cycles):
        rng = RngStream(seed, c)
        cfg = RestrictedConfig(q)
        yield cfg.copy()
        for _ in range(horizon):
            step_restricted(cfg, sample_restricted_arrival(rng, q))
            if not len(cfg):
                break
            yield cfg.copy()
        else:
            raise CensoredCycleError(f"cycle {c} at q={q} did not close within {horizon} steps")


@dataclass(frozen=True)
class MinLaw:
    """Stationary law of the restricted minimum in exponential coordinates.

    ``tail[j]`` is the empirical ``P[N > s_grid[j]]``; ``deviation`` is the
    largest gap to ``1 - s`` over the grid.
    """

    q: float
    t_plus: float
    states: int
    cycles: int
    empty_fraction: float
    s_grid: np.ndarray
    tail: np.ndarray
    deviation: float

    @property
    def mean_cycle_length(self) -> float:
        return self.states / self.cycles


def stationary_min_law(q: float, n_samples: int | None, seed: int, *,
                       cycles: int | None = None, horizon: int = DEFAULT_HORIZON,
                       grid: int = MIN_LAW_GRID, threads: int | None = None) -> MinLaw:
    """Regeneration estimate of the stationary minimum law.

    Whole cycles are simulated in replica order until at least
    ``n_samples`` states have been emitted, or exactly ``cycles`` cycles
    when that is given instead.
    """
    q = check_unit(q, "q")
    if (n_samples is None) == (cycles is None):
        raise ValueError("give exactly one of n_samples and cycles")
    if cycles is not None:
        cycles_wanted = check_int(cycles, "cycles", minimum=1)
        n_samples = None
    else:
        n_samples = check_int(n_samples, "n_samples", minimum=1)
        cycles_wanted = None
    seed = check_seed(seed)
    if q >= P_C:
        raise ValueError(f"q={q} must lie below the critical point {P_C:.6f}")
    t_plus = to_exp(q)
    s_grid = t_plus * np.arange(grid) / grid
    qgrid = -np.expm1(-s_grid)
    useed = np.uint64(seed)
    threads = resolve_threads(threads)

    def work(first, count):
        hist = np.zeros(grid + 1, dtype=np.int64)
        st, emp, cens = K.stationary_block(useed, first, count, q, horizon, qgrid, hist)
        return st, emp, cens, hist

    states = cycles = 0
    hist = np.zeros(grid + 1, dtype=np.int64)

    def absorb(results) -> bool:
        nonlocal states, cycles
        for st, emp, cens, h in results:
            if cens:
                raise CensoredCycleError(
                    f"a cycle at q={q} did not close within {horizon} steps")
            states += st
            cycles += emp
            hist[:] += h
            if n_samples is not None and states >= n_samples:
                return True
        return False

    if cycles_wanted is not None:
        absorb(map_ordered(work, blocks(cycles_wanted), threads))
    else:
        next_block = 0
        batch = max(4, 4 * threads)
        while True:
            items = [((next_block + i) * BLOCK, BLOCK) for i in range(batch)]
            next_block += batch
            if absorb(map_ordered(work, items, threads)):
                break

    # tail[j] = #{N > s_j} = states whose minimum exceeds more than j grid points
    tail = np.cumsum(hist[::-1])[::-1][1:] / states
    dev = float(np.max(np.abs(tail - (1.0 - s_grid)))) if q > 0 else 0.0
    return MinLaw(q, t_plus, states, cycles, cycles / states, s_grid, tail, dev)


def stationary_min_uniformity(q: float, n_samples: int, seed: int, **kw) -> float:
    """Largest deviation of the stationary ``P[N > s]`` from ``1 - s``."""
    return stationary_min_law(q, n_samples, seed, **kw).deviation
