"""Acceptance criteria, one test each, at the stated sample sizes and tolerances.

Each test prints a single ``AC<n> PASS|FAIL`` line (collected again in the
terminal summary) before asserting.
"""
from __future__ import annotations

import math
import time
from fractions import Fraction as F

import numpy as np
from canyon import cli
from canyon.coupling import check_domination, check_inclusion
from canyon.criticality import (empirical_growth, estimate_critical_point, estimate_survival,
                                estimate_tail_exponent, growth_bound)
from canyon.engine import P_C, FullChain
from canyon.excursions import (closed_form_delta_densities, closed_form_mean_return,
                               estimate_delta_densities, estimate_mean_return,
                               sample_return_times, stationary_min_law)
from canyon.oracle import ProbPoly, eval_pmf, exact_return_pmf, truncated_mean_poly

from .conftest import ACCEPTANCE_LINES


def report(ac: int, ok: bool, detail: str) -> None:
    line = f"AC{ac:<2d} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_ac01_mean_return_time():
    parts, ok = [], True
    with Timer() as t:
        for q in (0.1, 0.3, 0.5, 0.6):
            est = estimate_mean_return(q, 10**6, 42)
            cf = closed_form_mean_return(q)
            rel = abs(est.mean - cf) / cf
            z = abs(est.mean - cf) / est.stderr
            ok &= rel < 0.01 and z < 3 and not est.is_lower_bound
            parts.append(f"q={q}: {est.mean:.5f} vs {cf:.5f} (rel {rel:.2e}, {z:.2f} se)")
    ok &= t.elapsed < 120
    report(1, ok, "; ".join(parts) + f"; {t.elapsed:.1f}s")


def test_ac02_oracle_exactness():
    def poly(*c):
        return ProbPoly([F(x) for x in c])

    one_minus = poly(1, -1)
    q = poly(0, 1)
    expected = [one_minus, q * one_minus, q * q * one_minus * F(1, 2),
                q * q * q * one_minus * F(1, 6) + q * q * one_minus * one_minus * F(1, 2)]
    with Timer() as t:
        got = exact_return_pmf(4)
    ok = got == expected and t.elapsed < 1.0
    report(2, ok, f"P[tau=k], k=1..4, equal as rational polynomials; {t.elapsed * 1e3:.1f}ms")


def test_ac03_series_consistency():
    with Timer() as t:
        m = truncated_mean_poly(exact_return_pmf(6))
    coeffs = [m.coeff(i) for i in range(4)]
    ok = coeffs == [1, 1, F(3, 2), F(7, 3)] and t.elapsed < 60
    report(3, ok, f"truncated-mean coefficients {[str(c) for c in coeffs]}; {t.elapsed:.2f}s")


def test_ac04_oracle_vs_monte_carlo():
    q, n = 0.5, 10**6
    with Timer() as t:
        tau, _, _ = sample_return_times(q, n, 4)
        pmf = exact_return_pmf(8)
    worst = 0.0
    for k, p in enumerate(pmf, start=1):
        exact = eval_pmf(p, q)
        sigma = math.sqrt(exact * (1 - exact) / n)
        worst = max(worst, abs(np.mean(tau == k) - exact) / sigma)
    ok = worst < 4 and t.elapsed < 60
    report(4, ok, f"max |P_hat - P| over k<=8 is {worst:.2f} sigma; {t.elapsed:.1f}s")


def test_ac05_delta_densities():
    with Timer() as t:
        dens = estimate_delta_densities([0.2, 0.5, 0.8], 10**7, 10**6, 7)
    parts, ok = [], True
    for d in dens:
        cf = closed_form_delta_densities(d.t).as_tuple()
        dev = max(abs(a - b) for a, b in zip(d.as_tuple(), cf))
        gap = abs(d.p_plus1 - d.p_minus1)
        ok &= dev <= 0.005 and gap < 0.003
        parts.append(f"t={d.t}: max dev {dev:.1e}, |p+1 - p-1| {gap:.1e}")
    ok &= t.elapsed < 300
    report(5, ok, "; ".join(parts) + f"; {t.elapsed:.1f}s")


def test_ac06_stationary_minimum_uniform():
    parts, ok = [], True
    with Timer() as t:
        for q in (1 - math.exp(-0.5), 0.5):
            law = stationary_min_law(q, 10**7, 3)
            efrac = abs(law.empty_fraction - (1 - law.t_plus))
            ok &= law.deviation < 0.01 and efrac <= 0.01 and law.states >= 10**7
            parts.append(f"q={q:.4f}: deviation {law.deviation:.1e}, "
                         f"empty fraction off by {efrac:.1e} ({law.states} states)")
    ok &= t.elapsed < 300
    report(6, ok, "; ".join(parts) + f"; {t.elapsed:.1f}s")


def test_ac07_critical_point():
    with Timer() as t:
        est = estimate_critical_point(0.5, 0.75, horizon=10**5, replicas=10**4, seed=0)
    target = 0.63212
    ok = (abs(est.estimate - target) <= 0.01 and est.lo - 0.01 <= target <= est.hi + 0.01
          and t.elapsed < 900)
    report(7, ok, f"bracket [{est.lo:.5f}, {est.hi:.5f}], estimate {est.estimate:.5f}; "
                  f"{t.elapsed:.0f}s")


def test_ac08_transience():
    with Timer() as t:
        hi = estimate_survival(0.8, 10**5, 10**4, 0)
        lo = estimate_survival(0.5, 10**5, 10**4, 0)
    ok = hi.ci_low > 0 and lo.survivors == 0 and t.elapsed < 300
    report(8, ok, f"q=0.8: {hi.survivors}/10^4 survive, CI [{hi.ci_low:.3f}, {hi.ci_high:.3f}]; "
                  f"q=0.5: {lo.survivors}/10^4; {t.elapsed:.0f}s")


def test_ac09_growth_bound():
    with Timer() as t:
        bound = growth_bound(2.0)
        rate = empirical_growth(2.0, 10**6, 0)
    ok = abs(bound - 0.232544) < 1e-6 and rate > bound - 0.02 and t.elapsed < 60
    report(9, ok, f"F_t(n)/n = {rate:.5f} vs bound {bound:.6f}; {t.elapsed:.1f}s")


def test_ac10_tail_exponent_conjecture_check():
    grid = 2 ** np.arange(8, 17)
    with Timer() as t:
        fit = estimate_tail_exponent(P_C, grid, 10**5, 0, fit_range=(2**8, 2**16))
    ok = (0.4 <= fit.exponent <= 0.6 and "conjecture" in fit.note and fit.status == "power-law"
          and t.elapsed < 1800)
    report(10, ok, f"conjecture check: exponent {fit.exponent:.3f} +/- {fit.stderr:.3f} "
                   f"over k in [{fit.k_range[0]}, {fit.k_range[1]}], R^2 {fit.fit_quality:.4f}; "
                   f"{t.elapsed:.1f}s")


def test_ac11_coupling():
    with Timer() as t:
        inc = check_inclusion(10**4, 10**3, 0)
        dom = check_domination(10**4, 10**3, 0, q=0.5)
    ok = inc.violations == 0 and dom.violations == 0 and t.elapsed < 60
    report(11, ok, f"inclusion {inc.violations} and domination {dom.violations} violations "
                   f"in 10^4 trials each; {t.elapsed:.1f}s")


def test_ac12_performance_and_determinism(capsys):
    FullChain(0).advance(1000)               # make sure the kernel is compiled
    chain = FullChain(12345)
    steps, chunk = 10**8, 1 << 22
    with Timer() as t:
        done = 0
        while done < steps:
            n = min(chunk, steps - done)
            chain.advance(n)
            done += n
    rate = steps / t.elapsed

    same = True
    for args in (["return-times", "--q", "0.5", "--n", "200000", "--seed", "99"],
                 ["min-law", "--q", "0.5", "--n", "200000", "--seed", "99"],
                 ["critical", "--horizon", "5000", "--replicas", "5000", "--probes", "3",
                  "--format", "json"]):
        outs = []
        for threads in ("1", "8"):
            assert cli.main(args + ["--threads", threads]) == 0
            outs.append(capsys.readouterr().out.encode())
        same &= outs[0] == outs[1]
    ok = rate >= 5e6 and same
    report(12, ok, f"{rate / 1e6:.2f}M steps/s over 10^8 steps; "
                   f"byte-identical at 1 and 8 threads: {same}")
