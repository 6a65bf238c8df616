"""Step semantics of the full and restricted chains.

The full chain adds a uniform point each step and, when the new point lies
strictly right of the current minimum, removes that minimum.  The
restricted chain is the same process seen through the window ``[0, q]``:
an arrival right of ``q`` only removes the minimum.

Two layers live here.  The object layer (:class:`FullConfig`,
:class:`RestrictedConfig`, :func:`step_full`, :func:`step_restricted`) is
plain Python and is what the coupling tests and the exact oracle replay
against.  The array layer (:class:`FullChain`, :class:`RestrictedChain`,
:func:`run`) drives the compiled kernels with the same draws.

Ties between a draw and the current minimum take the add-only branch.
"""
from __future__ import annotations

import bisect
import heapq
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from . import _kernels as K
from ._validation import check_int, check_nonneg_real, check_seed, check_unit
from .fenwick import ThresholdIndex
from .rng import RngStream, replica_state

P_C = 1.0 - math.exp(-1.0)
"""Critical position 1 - 1/e."""

CHUNK = 1 << 22


class SimulationMemoryError(MemoryError):
    """Raised when particle storage cannot be allocated."""


def _alloc(n: int, dtype=np.float64) -> np.ndarray:
    try:
        return np.empty(n, dtype=dtype)
    except MemoryError as exc:
        raise SimulationMemoryError(
            f"cannot allocate storage for {n} particles; reduce --steps"
        ) from exc


# --- coordinates ------------------------------------------------------------

def to_exp(q: float) -> float:
    """Map a uniform position to exponential coordinates, ``-log(1 - q)``."""
    q = check_unit(q, "q", closed=True)
    if q == 1.0:
        raise OverflowError("q = 1 maps to +infinity in exponential coordinates")
    return -math.log1p(-q)


def from_exp(t: float) -> float:
    """Inverse of :func:`to_exp`, ``1 - exp(-t)``."""
    t = check_nonneg_real(t, "t")
    return -math.expm1(-t)


# --- outcomes and arrivals --------------------------------------------------

class Kind(IntEnum):
    ADDED = K.ADDED
    DISPLACED = K.DISPLACED
    REMOVED_MIN = K.REMOVED_MIN
    NOOP = K.NOOP


class Outcome(NamedTuple):
    kind: Kind
    removed: float | None = None


ADDED = Outcome(Kind.ADDED)
NOOP = Outcome(Kind.NOOP)


@dataclass(frozen=True)
class Inside:
    """A restricted-chain arrival at ``pos <= q``."""

    pos: float


class _Outside:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "OUTSIDE"


OUTSIDE = _Outside()
RestrictedArrival = Inside | _Outside


def induced_arrival(u: float, q: float) -> RestrictedArrival:
    """The restricted arrival a full-chain draw ``u`` induces in ``[0, q]``."""
    return Inside(u) if u <= q else OUTSIDE


def sample_restricted_arrival(rng: RngStream, q: float) -> RestrictedArrival:
    """Outside with probability ``1 - q``, else Inside at a uniform point of ``[0, q]``."""
    q = check_unit(q, "q")
    return induced_arrival(rng.random(), q)


# --- configurations ---------------------------------------------------------

class FullConfig:
    """Finite particle set of the full chain (a binary min-heap).

    ``thresholds`` optionally attaches a :class:`ThresholdIndex` that is
    kept current on every insert and removal.
    """

    def __init__(self, particles: Iterable[float] = (), thresholds=None):
        self._heap = [check_unit(p, "particle") for p in particles]
        heapq.heapify(self._heap)
        self.index = None
        if thresholds is not None:
            self.index = ThresholdIndex(thresholds)
            for p in self._heap:
                self.index.add(p)

    def __len__(self) -> int:
        return len(self._heap)

    def __repr__(self) -> str:
        return f"FullConfig({self.particles()})"

    def particles(self) -> list[float]:
        return sorted(self._heap)

    def peek_min(self) -> float | None:
        return self._heap[0] if self._heap else None

    def insert(self, p: float) -> None:
        heapq.heappush(self._heap, p)
        if self.index is not None:
            self.index.add(p)

    def pop_min(self) -> float:
        p = heapq.heappop(self._heap)
        if self.index is not None:
            self.index.remove(p)
        return p

    def replace_min(self, p: float) -> float:
        old = heapq.heapreplace(self._heap, p)
        if self.index is not None:
            self.index.add(p)
            self.index.remove(old)
        return old

    def threshold_counts(self) -> np.ndarray:
        if self.index is None:
            raise ValueError("no threshold index attached")
        return self.index.counts()

    def copy(self) -> "FullConfig":
        new = FullConfig.__new__(FullConfig)
        new._heap = list(self._heap)
        new.index = None if self.index is None else self.index.copy()
        return new


class RestrictedConfig:
    """Particles of the chain inside ``[0, cutoff]``, kept sorted."""

    def __init__(self, cutoff: float, particles: Iterable[float] = ()):
        self.cutoff = check_unit(cutoff, "cutoff")
        parts = sorted(check_unit(p, "particle") for p in particles)
        if parts and parts[-1] > self.cutoff:
            raise ValueError(f"particle {parts[-1]} lies right of cutoff {self.cutoff}")
        self._parts = parts

    def __len__(self) -> int:
        return len(self._parts)

    def __repr__(self) -> str:
        return f"RestrictedConfig(cutoff={self.cutoff}, {self._parts})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, RestrictedConfig):
            return NotImplemented
        return self.cutoff == other.cutoff and self._parts == other._parts

    def particles(self) -> list[float]:
        return list(self._parts)

    def peek_min(self) -> float | None:
        return self._parts[0] if self._parts else None

    def copy(self) -> "RestrictedConfig":
        new = RestrictedConfig.__new__(RestrictedConfig)
        new.cutoff = self.cutoff
        new._parts = list(self._parts)
        return new


def restrict(cfg: FullConfig, q: float) -> RestrictedConfig:
    """Intersect a full configuration with ``[0, q]``."""
    return RestrictedConfig(q, [p for p in cfg.particles() if p <= q])


def minimum(cfg: FullConfig | RestrictedConfig) -> float:
    """Least particle; empty sets report 1 (full) or the cutoff (restricted)."""
    m = cfg.peek_min()
    if m is not None:
        return m
    return cfg.cutoff if isinstance(cfg, RestrictedConfig) else 1.0


def exp_minimum(cfg: FullConfig | RestrictedConfig) -> float | None:
    """Minimum in exponential coordinates, or ``None`` for an empty set."""
    m = cfg.peek_min()
    return None if m is None else to_exp(m)


def count_in_range(cfg: FullConfig | RestrictedConfig, s: float, q: float) -> int:
    """Number of particles ``p`` with ``s <= p <= q``."""
    if s > q:
        raise ValueError(f"empty range: s={s} > q={q}")
    if isinstance(cfg, RestrictedConfig):
        parts = cfg._parts
        return bisect.bisect_right(parts, q) - bisect.bisect_left(parts, s)
    return sum(1 for p in cfg._heap if s <= p <= q)


def step_full(cfg: FullConfig, u: float) -> Outcome:
    """Apply one full-chain step in place and report what happened."""
    m = cfg.peek_min()
    if m is None or u <= m:
        cfg.insert(u)
        return ADDED
    return Outcome(Kind.DISPLACED, cfg.replace_min(u))


def step_restricted(cfg: RestrictedConfig, a: RestrictedArrival) -> Outcome:
    """Apply one restricted-chain step in place."""
    parts = cfg._parts
    if isinstance(a, Inside):
        p = a.pos
        if p > cfg.cutoff:
            raise ValueError(f"Inside arrival {p} lies right of cutoff {cfg.cutoff}")
        if not parts or p <= parts[0]:
            parts.insert(0, p)
            return ADDED
        removed = parts.pop(0)
        bisect.insort(parts, p)
        return Outcome(Kind.DISPLACED, removed)
    if parts:
        return Outcome(Kind.REMOVED_MIN, parts.pop(0))
    return NOOP


# --- compiled drivers -------------------------------------------------------

class StepRecord(NamedTuple):
    """Observer record: state after step ``k``."""

    k: int
    kind: Kind
    removed: float | None
    minimum: float
    size: int
    counts: tuple[int, ...] | None = None


class FullChain:
    """Array-backed full chain driven by the compiled kernel.

    Parameters
    ----------
    seed, replica : int
        Stream identity; see :mod:`canyon.rng`.
    thresholds : array_like, optional
        Uniform-coordinate grid for threshold counts.
    """

    def __init__(self, seed: int = 0, replica: int = 0, thresholds=None):
        self.rng = replica_state(check_seed(seed), replica)
        self.heap = _alloc(1024)
        self.size = 0
        self.k = 0
        if thresholds is None:
            self.grid = np.empty(0)
        else:
            self.grid = ThresholdIndex(thresholds).grid
        self.tree = np.zeros(self.grid.size + 1, dtype=np.int64)

    @property
    def tracking(self) -> bool:
        return self.grid.size > 0

    def minimum(self) -> float:
        return float(self.heap[0]) if self.size else 1.0

    def particles(self) -> np.ndarray:
        return np.sort(self.heap[: self.size])

    def counts(self) -> np.ndarray:
        out = np.zeros(self.grid.size, dtype=np.int64)
        K.fenwick_counts(self.tree, out)
        return out

    def _reserve(self, extra: int) -> None:
        need = self.size + extra
        if need > self.heap.size:
            new = _alloc(max(need, 2 * self.heap.size))
            new[: self.size] = self.heap[: self.size]
            self.heap = new

    def advance(self, steps: int, *, stride: int = 0, tally=None,
                win_start: int | None = None, winmax: float = -1.0):
        """Advance ``steps`` steps in one kernel call.

        Returns ``(rec_i, rec_f, rec_c, winmax)``; the record arrays are
        empty when ``stride == 0``.
        """
        self._reserve(steps)
        nrec = steps // stride + 1 if stride > 0 else 0
        rec_i = np.zeros((nrec, 3), dtype=np.int64)
        rec_f = np.zeros((nrec, 2))
        rec_c = np.zeros((nrec, self.grid.size), dtype=np.int64)
        tally_arr = tally if tally is not None else np.zeros((self.grid.size, 4), dtype=np.int64)
        ws = win_start if win_start is not None else np.iinfo(np.int64).max
        self.size, self.k, n, winmax = K.advance_full(
            self.heap, self.size, self.k, self.rng, steps, stride,
            self.grid, self.tree, self.tracking, tally_arr, tally is not None,
            ws, winmax, rec_i, rec_f, rec_c)
        return rec_i[:n], rec_f[:n], rec_c[:n], winmax


class RestrictedChain:
    """Array-backed restricted chain on ``[0, q]``."""

    def __init__(self, q: float, seed: int = 0, replica: int = 0):
        self.q = check_unit(q, "q")
        self.rng = replica_state(check_seed(seed), replica)
        self.heap = _alloc(1024)
        self.size = 0
        self.k = 0

    def particles(self) -> np.ndarray:
        return np.sort(self.heap[: self.size])

    def advance(self, steps: int, *, stride: int = 0):
        need = self.size + steps
        if need > self.heap.size:
            new = _alloc(max(need, 2 * self.heap.size))
            new[: self.size] = self.heap[: self.size]
            self.heap = new
        nrec = steps // stride + 1 if stride > 0 else 0
        rec_i = np.zeros((nrec, 3), dtype=np.int64)
        rec_f = np.zeros((nrec, 2))
        self.size, self.k, n = K.advance_restricted(
            self.heap, self.size, self.k, self.rng, self.q, steps, stride, rec_i, rec_f)
        return rec_i[:n], rec_f[:n]


def _records(rec_i, rec_f, rec_c) -> Iterator[StepRecord]:
    for j in range(rec_i.shape[0]):
        removed = rec_f[j, 0]
        yield StepRecord(
            int(rec_i[j, 0]),
            Kind(int(rec_i[j, 1])),
            None if math.isnan(removed) else float(removed),
            float(rec_f[j, 1]),
            int(rec_i[j, 2]),
            tuple(int(c) for c in rec_c[j]) if rec_c is not None and rec_c.shape[1] else None,
        )


def run(seed: int, steps: int, mode: str = "full",
        observers: Sequence[Callable[[StepRecord], None]] = (), *,
        stride: int = 1, q: float | None = None, thresholds=None,
        replica: int = 0, chunk: int = CHUNK) -> Iterator[StepRecord]:
    """Simulate ``steps`` steps and stream a record every ``stride`` steps.

    ``mode`` is ``"full"`` or ``"restricted"`` (the latter needs ``q``).
    Each record is passed to every observer and then yielded, so the
    generator must be consumed for observers to fire.
    """
    seed = check_seed(seed)
    steps = check_int(steps, "steps")
    stride = check_int(stride, "stride", minimum=1)
    if mode == "full":
        chain = FullChain(seed, replica, thresholds)
    elif mode == "restricted":
        if q is None:
            raise ValueError("restricted mode needs a cutoff q")
        if thresholds is not None:
            raise ValueError("threshold counts are only available in full mode")
        chain = RestrictedChain(q, seed, replica)
    else:
        raise ValueError(f"unknown mode {mode!r}; expected 'full' or 'restricted'")
    done = 0
    while done < steps:
        n = min(chunk, steps - done)
        if mode == "full":
            rec_i, rec_f, rec_c, _ = chain.advance(n, stride=stride)
        else:
            rec_i, rec_f = chain.advance(n, stride=stride)
            rec_c = None
        done += n
        for rec in _records(rec_i, rec_f, rec_c):
            for obs in observers:
                obs(rec)
            yield rec
