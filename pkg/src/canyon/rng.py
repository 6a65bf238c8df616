"""Portable, replica-indexed random streams.

Every stream is xoshiro256** seeded from SplitMix64.  Replica ``i`` of
master seed ``s`` starts SplitMix64 at ``s ^ i`` and takes four outputs
as the xoshiro state, so the draw sequence depends only on ``(s, i)``.
Uniforms use the top 53 bits: ``(x >> 11) * 2**-53``, which lies in [0, 1).

Two implementations are kept in lockstep: a pure-Python one behind
:class:`RngStream` and numba versions used by the compiled kernels.
"""
from __future__ import annotations

import numpy as np
from numba import njit

ALGORITHM = "xoshiro256**/splitmix64"

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO_M53 = 1.0 / (1 << 53)


def splitmix64(x: int) -> tuple[int, int]:
    """Advance a SplitMix64 state; return ``(new_state, output)``."""
    x = (x + _GOLDEN) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return x, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


def replica_state(seed: int, replica: int) -> np.ndarray:
    """The 256-bit xoshiro state for ``(seed, replica)`` as a uint64[4] array."""
    x = (int(seed) ^ int(replica)) & _MASK
    words = []
    for _ in range(4):
        x, out = splitmix64(x)
        words.append(out)
    return np.array(words, dtype=np.uint64)


class RngStream:
    """Pure-Python xoshiro256** stream for one ``(seed, replica)`` pair.

    Slow, but bit-identical to the compiled kernels; used by the
    step-level API and as a cross-check.
    """

    def __init__(self, seed: int, replica: int = 0):
        self.seed = int(seed) & _MASK
        self.replica = int(replica)
        self._s = [int(w) for w in replica_state(self.seed, self.replica)]

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, replica={self.replica})"

    @property
    def state(self) -> np.ndarray:
        return np.array(self._s, dtype=np.uint64)

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """One uniform draw in [0, 1)."""
        return (self.next_u64() >> 11) * _TWO_M53


# --- compiled twins -------------------------------------------------------
# Every integer constant is a typed uint64; mixing with Python ints would
# silently promote to float64 inside numba.

_U1 = np.uint64(1)
_U5 = np.uint64(5)
_U7 = np.uint64(7)
_U9 = np.uint64(9)
_U11 = np.uint64(11)
_U17 = np.uint64(17)
_U27 = np.uint64(27)
_U30 = np.uint64(30)
_U31 = np.uint64(31)
_U45 = np.uint64(45)
_U64 = np.uint64(64)
_UGOLDEN = np.uint64(_GOLDEN)
_UMIX1 = np.uint64(_MIX1)
_UMIX2 = np.uint64(_MIX2)


@njit(cache=True, nogil=True)
def _rotl_nb(x, k):
    return (x << k) | (x >> (_U64 - k))


@njit(cache=True, nogil=True)
def seed_state_nb(state, seed, replica):
    """Fill ``state`` (uint64[4]) for ``(seed, replica)`` in place."""
    x = np.uint64(seed) ^ np.uint64(replica)
    for i in range(4):
        x = x + _UGOLDEN
        z = x
        z = (z ^ (z >> _U30)) * _UMIX1
        z = (z ^ (z >> _U27)) * _UMIX2
        state[i] = z ^ (z >> _U31)


@njit(cache=True, nogil=True)
def next_u64_nb(s):
    result = _rotl_nb(s[1] * _U5, _U7) * _U9
    t = s[1] << _U17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl_nb(s[3], _U45)
    return result


@njit(cache=True, nogil=True)
def uniform_nb(s):
    return np.float64(next_u64_nb(s) >> _U11) * _TWO_M53
