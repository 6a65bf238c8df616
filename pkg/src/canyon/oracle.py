"""Exact return-time distribution of the restricted chain.

Only the relative order of the points matters to the dynamics, so an
excursion is determined by its inside/outside pattern together with the
relative order of its inside arrivals.  Inside arrivals are i.i.d. uniform
on ``[0, q]``, hence each of the ``m!`` relative orders of ``m`` inside
arrivals is equally likely, and a pattern with ``m`` inside and ``k - m``
outside arrivals carries weight ``q**m * (1 - q)**(k - m) / m!``.  Summing
those weights over every pattern/order whose replay first empties at step
``k`` gives ``P[tau = k]`` as a polynomial in ``q`` with rational
coefficients.

The default path is a forward recursion over rank states ``(S, m)``:
``m`` inside arrivals so far and ``S`` the ranks (among those ``m``) of
the particles still present.  A new inside arrival falls into each of the
``m + 1`` rank slots with probability ``1 / (m + 1)``, which reproduces the
``1 / m!`` weights while merging orders that reach the same state.
:func:`exact_return_pmf_bruteforce` enumerates the orders explicitly and
replays them through :func:`canyon.engine.step_restricted`.
"""
from __future__ import annotations

import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from ._validation import check_int, check_unit
from .engine import OUTSIDE, Inside, RestrictedConfig, step_restricted

MAX_KMAX = 11


class CostLimitError(ValueError):
    """Requested enumeration depth exceeds :data:`MAX_KMAX`."""


class ProbPoly:
    """Polynomial in ``q`` with exact rational coefficients (index = power)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence = ()):
        c = [Fraction(x) for x in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.coeffs = tuple(c)

    @classmethod
    def q_power_mix(cls, m: int, n: int) -> "ProbPoly":
        """Expansion of ``q**m * (1 - q)**n``."""
        c = [Fraction(0)] * (m + n + 1)
        for j in range(n + 1):
            c[m + j] = Fraction(math.comb(n, j) * (-1) ** j)
        return cls(c)

    def __repr__(self) -> str:
        return f"ProbPoly({[str(c) for c in self.coeffs]})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProbPoly):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __add__(self, other: "ProbPoly") -> "ProbPoly":
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return ProbPoly(x + y for x, y in zip(a, b))

    def __mul__(self, other) -> "ProbPoly":
        if isinstance(other, ProbPoly):
            if not self.coeffs or not other.coeffs:
                return ProbPoly()
            c = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
            for i, a in enumerate(self.coeffs):
                for j, b in enumerate(other.coeffs):
                    c[i + j] += a * b
            return ProbPoly(c)
        return ProbPoly(a * Fraction(other) for a in self.coeffs)

    __rmul__ = __mul__

    def __sub__(self, other: "ProbPoly") -> "ProbPoly":
        return self + other * -1

    def coeff(self, power: int) -> Fraction:
        return self.coeffs[power] if power < len(self.coeffs) else Fraction(0)

    def exact(self, q) -> Fraction:
        """Evaluate at a rational (or float, converted exactly) ``q``."""
        q = Fraction(q)
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * q + c
        return acc

    def to_json_obj(self, k: int) -> dict:
        return {"k": k, "coeffs": [[str(c.numerator), str(c.denominator)] for c in self.coeffs]}

    @classmethod
    def from_json_obj(cls, obj: dict) -> tuple[int, "ProbPoly"]:
        return int(obj["k"]), cls(Fraction(int(n), int(d)) for n, d in obj["coeffs"])


def eval_pmf(poly: ProbPoly, q: float) -> float:
    """Exact evaluation, rounded to float only at the end."""
    check_unit(q, "q", closed=True)
    return float(poly.exact(q))


def _check_kmax(kmax: int) -> int:
    kmax = check_int(kmax, "kmax", minimum=1)
    if kmax > MAX_KMAX:
        raise CostLimitError(
            f"kmax={kmax} exceeds the enumeration limit {MAX_KMAX} "
            f"(cost grows like e*k!)")
    return kmax


def _collect(weights: list[dict[tuple[int, int], Fraction]]) -> list[ProbPoly]:
    out = []
    for k, by_split in enumerate(weights, start=1):
        poly = ProbPoly()
        for (m, n), c in sorted(by_split.items()):
            poly = poly + ProbPoly.q_power_mix(m, n) * c
        out.append(poly)
    return out


def exact_return_pmf(kmax: int) -> list[ProbPoly]:
    """``P[tau = k]`` for ``k = 1..kmax`` via the memoized rank recursion."""
    kmax = _check_kmax(kmax)
    absorbed = [defaultdict(Fraction) for _ in range(kmax)]
    # step 1 from the empty state
    absorbed[0][(0, 1)] += 1
    states: dict[tuple[tuple[int, ...], int], Fraction] = {((0,), 1): Fraction(1)}
    for j in range(1, kmax):
        nxt: dict[tuple[tuple[int, ...], int], Fraction] = defaultdict(Fraction)
        for (S, m), c in states.items():
            # outside: drop the minimum
            rest = S[1:]
            if rest:
                nxt[(rest, m)] += c
            else:
                absorbed[j][(m, j + 1 - m)] += c
            # inside at each rank slot r among m + 1
            w = c / (m + 1)
            for r in range(m + 1):
                shifted = tuple(s + 1 if s >= r else s for s in S)
                if r < shifted[0]:
                    new = (r,) + shifted
                else:
                    new = tuple(sorted(shifted[1:] + (r,)))
                nxt[(new, m + 1)] += w
        states = nxt
    return _collect(absorbed)


def _replay_positions(pattern: Sequence[bool], order: Sequence[int], cutoff: float):
    """Concrete arrivals realizing ``pattern`` with inside ranks ``order``."""
    m = len(order)
    it = iter(order)
    for inside in pattern:
        if inside:
            yield Inside(cutoff * (next(it) + 1) / (m + 1))
        else:
            yield OUTSIDE


def first_empty_step(pattern: Sequence[bool], order: Sequence[int], cutoff: float = 0.5) -> int | None:
    """Replay a pattern through the step function; first step that empties, if any."""
    cfg = RestrictedConfig(cutoff)
    for k, a in enumerate(_replay_positions(pattern, order, cutoff), start=1):
        step_restricted(cfg, a)
        if not len(cfg):
            return k
    return None


def exact_return_pmf_bruteforce(kmax: int) -> list[ProbPoly]:
    """Un-memoized enumeration over patterns and permutations (slow; ``kmax <= 8``)."""
    kmax = check_int(kmax, "kmax", minimum=1)
    if kmax > 8:
        raise CostLimitError("brute-force enumeration is limited to kmax <= 8")
    absorbed = [defaultdict(Fraction) for _ in range(kmax)]
    for k in range(1, kmax + 1):
        for pattern in itertools.product((False, True), repeat=k):
            m = sum(pattern)
            w = Fraction(1, math.factorial(m))
            for order in itertools.permutations(range(m)):
                if first_empty_step(pattern, order) == k:
                    absorbed[k - 1][(m, k - m)] += w
    return _collect(absorbed)


def truncated_mean_poly(pmf: Sequence[ProbPoly]) -> ProbPoly:
    """``sum_k k * P[tau = k]`` over the supplied terms."""
    total = ProbPoly()
    for k, p in enumerate(pmf, start=1):
        total = total + p * k
    return total


@dataclass(frozen=True)
class TruncatedMean:
    lower: float
    tail_mass: float
    diagnostic: float
    closed_form: float


def truncated_mean_check(kmax: int, q: float) -> TruncatedMean:
    """Lower bound on the mean return time from the first ``kmax`` terms.

    ``tail_mass`` is ``P[tau > kmax]``; ``diagnostic`` is
    ``lower + (kmax + 1) * tail_mass`` (itself still a lower bound).
    """
    from .excursions import closed_form_mean_return

    q = check_unit(q, "q")
    pmf = exact_return_pmf(kmax)
    lower = truncated_mean_poly(pmf).exact(q)
    tail = 1 - sum((p.exact(q) for p in pmf), Fraction(0))
    closed = closed_form_mean_return(q)
    if float(lower) > closed:
        raise ArithmeticError(f"truncated mean {float(lower)} exceeds closed form {closed}")
    return TruncatedMean(float(lower), float(tail), float(lower + (kmax + 1) * tail), closed)


def pmf_to_json(pmf: Sequence[ProbPoly], **dump_kw) -> str:
    return json.dumps([p.to_json_obj(k) for k, p in enumerate(pmf, start=1)], **dump_kw)


def pmf_from_json(text: str) -> list[ProbPoly]:
    items = sorted((ProbPoly.from_json_obj(o) for o in json.loads(text)), key=lambda kp: kp[0])
    return [p for _, p in items]
