"""Coupling checks for the chain's two monotonicity properties.

* Inclusion: if ``x`` is a subset of ``y``, the full chains started from
  ``x`` and ``y`` and fed the same draws stay nested at every step.
* Ordered domination: list ``x`` and ``y`` in decreasing order; if
  ``|x| <= |y|`` and ``x[i] <= y[i]`` for every ``i``, the restricted
  chains fed the same arrivals keep that relation at every step.

Trial ``i`` draws its initial sets and its arrivals from replica stream
``i``, so a report is a pure function of ``(seed, trials, steps, ...)``.
The compiled checkers keep each configuration as an ascending array and
compare the full sets after every step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ._parallel import blocks, map_ordered
from ._validation import check_int, check_seed, check_unit
from .engine import (FullConfig, RestrictedConfig, induced_arrival, restrict,
                     step_full, step_restricted)
from .rng import seed_state_nb, uniform_nb


@dataclass(frozen=True)
class CouplingReport:
    check: str
    trials: int
    steps: int
    violations: int
    first_violation: int | None = None

    @property
    def ok(self) -> bool:
        return self.violations == 0


# --- sorted-array chain steps --------------------------------------------------

@njit(cache=True, nogil=True)
def _full_step_sorted(a, n, u):
    """Full step on an ascending array of length ``n``; returns new length."""
    if n == 0 or u <= a[0]:
        for i in range(n, 0, -1):
            a[i] = a[i - 1]
        a[0] = u
        return n + 1
    # drop a[0], insert u
    i = 0
    while i + 1 < n and a[i + 1] < u:
        a[i] = a[i + 1]
        i += 1
    a[i] = u
    return n


@njit(cache=True, nogil=True)
def _restricted_step_sorted(a, n, u, q):
    if u <= q:
        return _full_step_sorted(a, n, u)
    if n > 0:
        for i in range(n - 1):
            a[i] = a[i + 1]
        return n - 1
    return 0


@njit(cache=True, nogil=True)
def _is_subset(a, na, b, nb):
    j = 0
    for i in range(na):
        while j < nb and b[j] < a[i]:
            j += 1
        if j == nb or b[j] != a[i]:
            return False
        j += 1
    return True


@njit(cache=True, nogil=True)
def _dominated(a, na, b, nb):
    """Decreasing-order domination of ``a`` by ``b`` (both ascending arrays)."""
    if na > nb:
        return False
    for i in range(na):
        if a[na - 1 - i] > b[nb - 1 - i]:
            return False
    return True


@njit(cache=True, nogil=True)
def _sort_prefix(a, n):
    a[:n] = np.sort(a[:n])


@njit(cache=True, nogil=True)
def _inclusion_block(seed, first, ntrials, steps, max_init):
    rng = np.empty(4, dtype=np.uint64)
    cap = steps + max_init + 1
    x = np.empty(cap)
    y = np.empty(cap)
    bad = 0
    first_bad = -1
    for t in range(ntrials):
        seed_state_nb(rng, seed, np.uint64(first + t))
        ny = int(uniform_nb(rng) * (max_init + 1))
        nx = 0
        for i in range(ny):
            y[i] = uniform_nb(rng)
            if uniform_nb(rng) < 0.5:
                x[nx] = y[i]
                nx += 1
        _sort_prefix(y, ny)
        _sort_prefix(x, nx)
        for _ in range(steps):
            u = uniform_nb(rng)
            nx = _full_step_sorted(x, nx, u)
            ny = _full_step_sorted(y, ny, u)
            if not _is_subset(x, nx, y, ny):
                bad += 1
                if first_bad < 0:
                    first_bad = first + t
                break
    return bad, first_bad


@njit(cache=True, nogil=True)
def _domination_block(seed, first, ntrials, steps, q, max_init):
    rng = np.empty(4, dtype=np.uint64)
    cap = steps + max_init + 1
    x = np.empty(cap)
    y = np.empty(cap)
    bad = 0
    first_bad = -1
    for t in range(ntrials):
        seed_state_nb(rng, seed, np.uint64(first + t))
        ny = int(uniform_nb(rng) * (max_init + 1))
        for i in range(ny):
            y[i] = q * uniform_nb(rng)
        _sort_prefix(y, ny)
        nx = int(uniform_nb(rng) * (ny + 1))
        # x_i uniform below y_i (decreasing order) keeps the domination after sorting
        for i in range(nx):
            x[i] = y[ny - 1 - i] * uniform_nb(rng)
        _sort_prefix(x, nx)
        if not _dominated(x, nx, y, ny):
            bad += 1
            if first_bad < 0:
                first_bad = first + t
            continue
        for _ in range(steps):
            u = uniform_nb(rng)
            nx = _restricted_step_sorted(x, nx, u, q)
            ny = _restricted_step_sorted(y, ny, u, q)
            if not _dominated(x, nx, y, ny):
                bad += 1
                if first_bad < 0:
                    first_bad = first + t
                break
    return bad, first_bad


def _run_blocks(kernel, name, trials, steps, threads, *args):
    results = map_ordered(lambda f, c: kernel(*args[:1], f, c, *args[1:]), blocks(trials), threads)
    bad = sum(r[0] for r in results)
    firsts = [r[1] for r in results if r[1] >= 0]
    return CouplingReport(name, trials, steps, int(bad), min(firsts) if firsts else None)


def check_inclusion(trials: int = 10**4, steps: int = 10**3, seed: int = 0, *,
                    max_init: int = 20, threads: int | None = None) -> CouplingReport:
    """Randomized check that nested starts stay nested under shared draws."""
    trials = check_int(trials, "trials", minimum=1)
    steps = check_int(steps, "steps")
    return _run_blocks(_inclusion_block, "inclusion", trials, steps, threads,
                       np.uint64(check_seed(seed)), steps, max_init)


def check_domination(trials: int = 10**4, steps: int = 10**3, seed: int = 0, *,
                     q: float = 0.5, max_init: int = 20, threads: int | None = None) -> CouplingReport:
    """Randomized check of ordered domination for the restricted chain on ``[0, q]``."""
    trials = check_int(trials, "trials", minimum=1)
    steps = check_int(steps, "steps")
    q = check_unit(q, "q")
    return _run_blocks(_domination_block, "domination", trials, steps, threads,
                       np.uint64(check_seed(seed)), steps, q, max_init)


# --- object-level predicates ---------------------------------------------------

def dominates(x, y) -> bool:
    """``y`` dominates ``x`` in decreasing order (``|x| <= |y|``, ``x_i <= y_i``)."""
    xs = sorted(x, reverse=True)
    ys = sorted(y, reverse=True)
    return len(xs) <= len(ys) and all(a <= b for a, b in zip(xs, ys))


def inclusion_holds(x, y, draws) -> bool:
    """Replay ``draws`` through :func:`step_full` from ``x`` and ``y``."""
    cx, cy = FullConfig(x), FullConfig(y)
    for u in draws:
        step_full(cx, u)
        step_full(cy, u)
        if not set(cx.particles()) <= set(cy.particles()):
            return False
    return True


def domination_holds(x, y, q, draws) -> bool:
    """Replay shared arrivals through :func:`step_restricted`."""
    cx, cy = RestrictedConfig(q, x), RestrictedConfig(q, y)
    for u in draws:
        a = induced_arrival(u, q)
        step_restricted(cx, a)
        step_restricted(cy, a)
        if not dominates(cx.particles(), cy.particles()):
            return False
    return True


def restriction_commutes(x, q, draws) -> bool:
    """Stepping the full chain then restricting equals restricting then stepping."""
    full = FullConfig(x)
    res = restrict(full, q)
    for u in draws:
        step_full(full, u)
        step_restricted(res, induced_arrival(u, q))
        if restrict(full, q) != res:
            return False
    return True
