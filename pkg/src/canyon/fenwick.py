"""Fenwick (binary indexed) tree over a fixed, sorted threshold grid.

A particle at position ``p`` lands in bin ``j``, the first grid point with
``grid[j] >= p``.  The prefix sum through bin ``j`` is then the number of
particles ``<= grid[j]``.  Particles right of the last grid point are not
tracked.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def fenwick_add(tree, grid, pos, delta):
    j = np.searchsorted(grid, pos)  # side='left': first grid[j] >= pos
    n = tree.shape[0] - 1
    i = j + 1
    while i <= n:
        tree[i] += delta
        i += i & (-i)


@njit(cache=True, nogil=True)
def fenwick_prefix(tree, j):
    """Sum of bins ``0..j`` (0-based)."""
    total = 0
    i = j + 1
    while i > 0:
        total += tree[i]
        i -= i & (-i)
    return total


@njit(cache=True, nogil=True)
def fenwick_counts(tree, out):
    for j in range(out.shape[0]):
        out[j] = fenwick_prefix(tree, j)


class ThresholdIndex:
    """Counts of tracked particles at or below each threshold.

    Parameters
    ----------
    grid : array_like
        Strictly increasing thresholds in uniform coordinates.
    """

    def __init__(self, grid):
        grid = np.asarray(grid, dtype=np.float64)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("threshold grid must be a non-empty 1-d array")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("threshold grid must be strictly increasing")
        self.grid = grid
        self.tree = np.zeros(grid.size + 1, dtype=np.int64)

    def add(self, pos: float) -> None:
        fenwick_add(self.tree, self.grid, pos, 1)

    def remove(self, pos: float) -> None:
        fenwick_add(self.tree, self.grid, pos, -1)

    def count_le(self, j: int) -> int:
        """Number of tracked particles ``<= grid[j]``."""
        return int(fenwick_prefix(self.tree, j))

    def counts(self) -> np.ndarray:
        out = np.zeros(self.grid.size, dtype=np.int64)
        fenwick_counts(self.tree, out)
        return out

    def copy(self) -> "ThresholdIndex":
        new = ThresholdIndex.__new__(ThresholdIndex)
        new.grid = self.grid
        new.tree = self.tree.copy()
        return new
