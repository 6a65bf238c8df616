"""Compiled hot loops for the full and restricted chains.

All kernels are ``nogil`` so the estimators can fan replica blocks out over
a plain thread pool.  Particle storage is an array-backed binary min-heap;
callers own the arrays and guarantee capacity (the heap can grow by at most
one particle per step).
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .fenwick import fenwick_add, fenwick_counts
from .rng import seed_state_nb, uniform_nb

# outcome codes, mirrored by engine.Kind
ADDED = 0
DISPLACED = 1
REMOVED_MIN = 2
NOOP = 3

# delta symbol codes, mirrored by excursions.DeltaSymbol
UNDER0 = 0
OVER0 = 1
MINUS1 = 2
PLUS1 = 3


@njit(cache=True, nogil=True)
def heap_push(h, n, x):
    i = n
    while i > 0:
        p = (i - 1) >> 1
        if h[p] <= x:
            break
        h[i] = h[p]
        i = p
    h[i] = x


@njit(cache=True, nogil=True)
def heap_sift_down(h, n, i):
    x = h[i]
    while True:
        c = 2 * i + 1
        if c >= n:
            break
        if c + 1 < n and h[c + 1] < h[c]:
            c += 1
        if h[c] >= x:
            break
        h[i] = h[c]
        i = c
    h[i] = x


@njit(cache=True, nogil=True)
def heap_pop(h, n):
    """Remove the root of a heap of size ``n`` (> 0); return the root."""
    top = h[0]
    n -= 1
    if n > 0:
        h[0] = h[n]
        heap_sift_down(h, n, 0)
    return top


@njit(cache=True, nogil=True)
def heap_replace(h, n, x):
    """Pop the root and push ``x`` in one sift."""
    top = h[0]
    h[0] = x
    heap_sift_down(h, n, 0)
    return top


@njit(cache=True, nogil=True)
def _grow(h):
    g = np.empty(2 * h.shape[0], dtype=h.dtype)
    g[: h.shape[0]] = h
    return g


@njit(cache=True, nogil=True)
def classify_code(prev, now):
    if now == prev:
        return UNDER0 if now == 0 else OVER0
    return PLUS1 if now > prev else MINUS1


@njit(cache=True, nogil=True)
def advance_full(heap, size, k, rng, steps, stride,
                 grid, tree, track, tally, tally_on,
                 win_start, winmax, rec_i, rec_f, rec_c):
    """Run ``steps`` full-chain steps.

    ``track`` keeps the Fenwick threshold index current; ``tally_on``
    accumulates delta-symbol counts per threshold into ``tally`` (G x 4).
    Records (k, kind, size) / (removed, minimum) / counts are written every
    ``stride`` steps when ``stride > 0``.  ``winmax`` is the running max of
    the post-step minimum over steps ``>= win_start``.

    Returns ``(size, k, nrec, winmax)``.
    """
    ng = grid.shape[0]
    prev = np.zeros(ng, dtype=np.int64)
    now = np.zeros(ng, dtype=np.int64)
    if tally_on:
        fenwick_counts(tree, prev)
    nrec = 0
    for _ in range(steps):
        u = uniform_nb(rng)
        k += 1
        if size == 0 or u <= heap[0]:
            heap_push(heap, size, u)
            size += 1
            kind = ADDED
            removed = np.nan
            if track:
                fenwick_add(tree, grid, u, 1)
        else:
            removed = heap_replace(heap, size, u)
            kind = DISPLACED
            if track:
                fenwick_add(tree, grid, u, 1)
                fenwick_add(tree, grid, removed, -1)
        m = heap[0]
        if k >= win_start and m > winmax:
            winmax = m
        if tally_on:
            fenwick_counts(tree, now)
            for j in range(ng):
                tally[j, classify_code(prev[j], now[j])] += 1
                prev[j] = now[j]
        if stride > 0 and k % stride == 0:
            rec_i[nrec, 0] = k
            rec_i[nrec, 1] = kind
            rec_i[nrec, 2] = size
            rec_f[nrec, 0] = removed
            rec_f[nrec, 1] = m
            if track:
                fenwick_counts(tree, rec_c[nrec])
            nrec += 1
    return size, k, nrec, winmax


@njit(cache=True, nogil=True)
def advance_restricted(heap, size, k, rng, q, steps, stride, rec_i, rec_f):
    """Run ``steps`` restricted-chain steps; a draw ``u <= q`` is Inside(u).

    Returns ``(size, k, nrec)``.
    """
    nrec = 0
    for _ in range(steps):
        u = uniform_nb(rng)
        k += 1
        removed = np.nan
        if u <= q:
            if size == 0 or u <= heap[0]:
                heap_push(heap, size, u)
                size += 1
                kind = ADDED
            else:
                removed = heap_replace(heap, size, u)
                kind = DISPLACED
        elif size > 0:
            removed = heap_pop(heap, size)
            size -= 1
            kind = REMOVED_MIN
        else:
            kind = NOOP
        if stride > 0 and k % stride == 0:
            rec_i[nrec, 0] = k
            rec_i[nrec, 1] = kind
            rec_i[nrec, 2] = size
            rec_f[nrec, 0] = removed
            rec_f[nrec, 1] = heap[0] if size > 0 else q
            nrec += 1
    return size, k, nrec


@njit(cache=True, nogil=True)
def excursion_block(seed, first, q, horizon, tau, peak, cens):
    """One excursion from the empty state per replica ``first + r``.

    ``tau`` gets the return time (or ``horizon`` when censored), ``peak``
    the largest restricted-set size seen.
    """
    rng = np.empty(4, dtype=np.uint64)
    heap = np.empty(64, dtype=np.float64)
    for r in range(tau.shape[0]):
        seed_state_nb(rng, seed, np.uint64(first + r))
        size = 0
        pk = 0
        k = 0
        returned = False
        while k < horizon:
            u = uniform_nb(rng)
            k += 1
            if u <= q:
                if size == 0 or u <= heap[0]:
                    if size == heap.shape[0]:
                        heap = _grow(heap)
                    heap_push(heap, size, u)
                    size += 1
                    if size > pk:
                        pk = size
                else:
                    heap_replace(heap, size, u)
            elif size > 0:
                heap_pop(heap, size)
                size -= 1
            if size == 0:
                returned = True
                break
        tau[r] = k
        peak[r] = pk
        cens[r] = not returned


@njit(cache=True, nogil=True)
def stationary_block(seed, first, ncycles, q, horizon, qgrid, hist):
    """Regeneration cycles ``first .. first+ncycles-1``.

    Every visited state (the empty start of the cycle included, the closing
    empty state excluded) is emitted once.  ``hist[i]`` counts emitted
    states whose minimum (``q`` when empty) exceeds exactly ``i`` grid
    points.  Returns ``(states, empties, censored)``; stops at the first
    censored cycle.
    """
    rng = np.empty(4, dtype=np.uint64)
    heap = np.empty(64, dtype=np.float64)
    states = 0
    empties = 0
    for c in range(ncycles):
        seed_state_nb(rng, seed, np.uint64(first + c))
        size = 0
        k = 0
        states += 1
        empties += 1
        hist[np.searchsorted(qgrid, q)] += 1
        while True:
            if k >= horizon:
                return states, empties, 1
            u = uniform_nb(rng)
            k += 1
            if u <= q:
                if size == 0 or u <= heap[0]:
                    if size == heap.shape[0]:
                        heap = _grow(heap)
                    heap_push(heap, size, u)
                    size += 1
                else:
                    heap_replace(heap, size, u)
            elif size > 0:
                heap_pop(heap, size)
                size -= 1
            if size == 0:
                break
            states += 1
            hist[np.searchsorted(qgrid, heap[0])] += 1
    return states, empties, 0
