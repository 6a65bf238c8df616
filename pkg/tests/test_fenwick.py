from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from canyon.fenwick import ThresholdIndex

unit = st.floats(0.0, 1.0, exclude_max=True)


@settings(max_examples=200, deadline=None)
@given(st.lists(unit, min_size=1, max_size=8, unique=True),
       st.lists(st.tuples(st.booleans(), unit), max_size=60))
def test_counts_match_brute_force(grid, ops):
    grid = sorted(grid)
    idx = ThresholdIndex(grid)
    live: list[float] = []
    for add, p in ops:
        if add or not live:
            idx.add(p)
            live.append(p)
        else:
            q = live.pop(0)
            idx.remove(q)
    expected = [sum(1 for p in live if p <= g) for g in grid]
    np.testing.assert_array_equal(idx.counts(), expected)
    for j, e in enumerate(expected):
        assert idx.count_le(j) == e


def test_boundary_point_counts_at_its_threshold():
    idx = ThresholdIndex([0.25, 0.5])
    idx.add(0.5)
    idx.add(0.25)
    idx.add(0.9)
    assert list(idx.counts()) == [1, 2]


def test_copy_is_independent():
    idx = ThresholdIndex([0.5])
    idx.add(0.1)
    c = idx.copy()
    c.add(0.2)
    assert idx.count_le(0) == 1 and c.count_le(0) == 2


@pytest.mark.parametrize("grid", [[], [0.5, 0.5], [0.6, 0.2], [[0.1, 0.2]]])
def test_rejects_bad_grids(grid):
    with pytest.raises(ValueError):
        ThresholdIndex(grid)
