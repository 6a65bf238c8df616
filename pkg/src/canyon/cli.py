"""Command-line front end.

Every subcommand writes either a CSV table or one JSON object.  Output is a
pure function of the flags and the seed: no timestamps, no host data, and
identical bytes for any ``--threads``.

Exit codes: 0 success, 1 internal error, 2 bad arguments or precondition
violation, 3 statistical guard failure (censored cycles, coupling
violations, a bracket that does not straddle the transition).
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import secrets
import sys
from typing import Iterable

import numpy as np

from . import __version__
from .coupling import check_domination, check_inclusion
from .criticality import (CriticalPointError, empirical_growth, estimate_critical_point,
                          estimate_tail_exponent, growth_bound)
from .engine import P_C, SimulationMemoryError, run
from .excursions import (CensoredCycleError, DeltaSymbol, closed_form_delta_densities,
                         closed_form_mean_return, estimate_delta_densities,
                         estimate_mean_return, stationary_min_law)
from .oracle import CostLimitError, eval_pmf, exact_return_pmf, truncated_mean_check

SCHEMA = "canyon/1"
DEFAULT_SEED = 20130501
METRIC_COLUMNS = ["param", "metric", "estimate", "stderr", "ci_low", "ci_high",
                  "closed_form", "deviation"]
Z95 = 1.959963984540054

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_GUARD = 0, 1, 2, 3


class GuardFailure(Exception):
    """Statistical guard tripped; output is still written."""


def fmt(x):
    """Nine significant digits for floats; integers and strings unchanged."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.9g}"
    return str(x)


def _json_value(x):
    if isinstance(x, dict):
        return {k: _json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_value(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x) or math.isinf(x):
            return fmt(x)
        return float(f"{x:.9g}")
    return x


def metric(param, name, estimate, stderr=None, closed_form=None):
    dev = None
    if closed_form is not None and estimate is not None and math.isfinite(closed_form):
        dev = estimate - closed_form
    lo = hi = None
    if stderr is not None and math.isfinite(stderr):
        lo, hi = estimate - Z95 * stderr, estimate + Z95 * stderr
    return {"param": param, "metric": name, "estimate": estimate, "stderr": stderr,
            "ci_low": lo, "ci_high": hi, "closed_form": closed_form, "deviation": dev}


# --- subcommands -------------------------------------------------------------
# each returns (columns, rows, summary); rows may be a lazy iterable

def cmd_simulate(a):
    thresholds = a.thresholds or None
    cols = ["k", "outcome", "removed", "minimum", "size"]
    if thresholds:
        cols += [f"count_le_{fmt(t)}" for t in thresholds]

    records = run(a.seed, a.steps, a.mode, stride=a.stride, q=a.q, thresholds=thresholds)
    # pull the first record now so that bad arguments fail before any output
    head = next(records, None)

    def rows():
        if head is None:
            return
        for r in itertools.chain([head], records):
            row = {"k": r.k, "outcome": r.kind.name.lower(), "removed": r.removed,
                   "minimum": r.minimum, "size": r.size}
            if r.counts is not None:
                row.update(zip(cols[5:], r.counts))
            yield row

    return cols, rows(), {}


def cmd_return_times(a):
    rows, summary = [], []
    censored = 0
    for q in a.q:
        est = estimate_mean_return(q, a.n, a.seed, a.horizon, threads=a.threads)
        cf = closed_form_mean_return(q)
        rows.append(metric(f"q={fmt(q)}", "mean_return", est.mean, est.stderr, cf))
        within = math.isfinite(cf) and abs(est.mean - cf) <= 3 * est.stderr
        summary.append({"q": q, "n": est.n, "estimate": est.mean, "stderr": est.stderr,
                        "closed_form": cf, "censored": est.censored, "within_3se": within,
                        "lower_bound": est.is_lower_bound})
        censored += est.censored
    out = {"results": summary}
    if censored:
        raise GuardFailure((METRIC_COLUMNS, rows, out), f"{censored} excursions censored")
    return METRIC_COLUMNS, rows, out


def cmd_delta_density(a):
    rows, summary = [], []
    for d in estimate_delta_densities(a.t, a.steps, a.burnin, a.seed, batches=a.batches):
        cf = closed_form_delta_densities(d.t).as_tuple()
        param = f"t={fmt(d.t)}"
        for sym, est, se, c in zip(DeltaSymbol, d.as_tuple(), d.stderr, cf):
            rows.append(metric(param, f"p[{sym}]", est, se, c))
        rows.append(metric(param, "p[+1]-p[-1]", d.p_plus1 - d.p_minus1, None, 0.0))
        summary.append({"t": d.t, "estimate": list(d.as_tuple()), "stderr": list(d.stderr),
                        "closed_form": list(cf), "counts": list(d.counts),
                        "max_deviation": max(abs(x - y) for x, y in zip(d.as_tuple(), cf))})
    return METRIC_COLUMNS, rows, {"results": summary}


def cmd_stationary(a):
    rows, summary = [], []
    for q in a.q:
        law = stationary_min_law(q, None, a.seed, cycles=a.cycles, horizon=a.horizon,
                                 threads=a.threads)
        p = f"q={fmt(q)}"
        rows.append(metric(p, "empty_fraction", law.empty_fraction, None, 1.0 - law.t_plus))
        rows.append(metric(p, "mean_cycle_length", law.mean_cycle_length, None,
                           closed_form_mean_return(q)))
        rows.append(metric(p, "states", law.states))
        summary.append({"q": q, "t_plus": law.t_plus, "cycles": law.cycles, "states": law.states,
                        "empty_fraction": law.empty_fraction,
                        "mean_cycle_length": law.mean_cycle_length,
                        "min_law_deviation": law.deviation})
    return METRIC_COLUMNS, rows, {"results": summary}


def cmd_min_law(a):
    law = stationary_min_law(a.q, a.n, a.seed, horizon=a.horizon, grid=a.grid, threads=a.threads)
    cols = ["s", "tail", "closed_form", "deviation"]
    rows = [{"s": s, "tail": p, "closed_form": 1.0 - s, "deviation": p - (1.0 - s)}
            for s, p in zip(law.s_grid, law.tail)]
    summary = {"q": a.q, "t_plus": law.t_plus, "states": law.states, "cycles": law.cycles,
               "max_deviation": law.deviation, "empty_fraction": law.empty_fraction,
               "empty_fraction_closed_form": 1.0 - law.t_plus}
    return cols, rows, summary


def cmd_oracle(a):
    pmf = exact_return_pmf(a.kmax)
    cols = ["k", "power", "numerator", "denominator"]
    rows = [{"k": k, "power": i, "numerator": str(c.numerator), "denominator": str(c.denominator)}
            for k, p in enumerate(pmf, start=1) for i, c in enumerate(p.coeffs)]
    summary = {"pmf": [p.to_json_obj(k) for k, p in enumerate(pmf, start=1)]}
    if a.q:
        summary["evaluations"] = [
            {"q": q, "pmf": [eval_pmf(p, q) for p in pmf], **_trunc(a.kmax, q)} for q in a.q]
    return cols, rows, summary


def _trunc(kmax, q):
    if q >= P_C:
        return {}
    t = truncated_mean_check(kmax, q)
    return {"truncated_mean": t.lower, "tail_mass": t.tail_mass, "diagnostic": t.diagnostic,
            "closed_form": t.closed_form}


def cmd_critical(a):
    cols = ["q", "verdict", "survivors", "replicas", "fraction", "ci_low", "ci_high"]
    try:
        est = estimate_critical_point(a.lo, a.hi, a.probes, a.horizon, a.replicas, a.seed,
                                      tol=a.tol, threads=a.threads)
    except CriticalPointError as exc:
        raise GuardFailure((cols, [], {"error": str(exc)}), str(exc)) from exc
    rows = [{"q": q, "verdict": v, "survivors": e.survivors, "replicas": e.replicas,
             "fraction": e.surviving_fraction, "ci_low": e.ci_low, "ci_high": e.ci_high}
            for q, v, e in est.probes]
    summary = {"lo": est.lo, "hi": est.hi, "estimate": est.estimate, "closed_form": P_C,
               "deviation": est.estimate - P_C, "horizon": est.horizon,
               "replicas_per_probe": est.replicas_per_probe}
    return cols, rows, summary


def cmd_tail(a):
    grid = a.k if a.k else [2**e for e in range(a.kmin_exp, a.kmax_exp + 1)]
    fit_range = (a.fit_lo, a.fit_hi) if a.fit_lo is not None and a.fit_hi is not None else None
    fit = estimate_tail_exponent(a.q, grid, a.replicas, a.seed, fit_range=fit_range,
                                 bootstrap=a.bootstrap, threads=a.threads)
    cols = ["k", "survival", "in_fit"]
    lo, hi = fit.k_range
    rows = [{"k": k, "survival": s, "in_fit": bool(lo <= k <= hi) and fit.status != "non-power-law"}
            for k, s in zip(fit.k, fit.survival)]
    summary = {"q": fit.q, "exponent": fit.exponent, "stderr": fit.stderr,
               "k_range": list(fit.k_range), "fit_quality": fit.fit_quality,
               "status": fit.status, "conjectured_exponent": 0.5,
               "kind": "conjecture check", "note": fit.note, "replicas": fit.replicas}
    return cols, rows, summary


def cmd_growth(a):
    rows = []
    for t in a.t:
        bound = growth_bound(t)
        rows.append(metric(f"t={fmt(t)}", "growth_rate", empirical_growth(t, a.n, a.seed),
                           None, bound))
    return METRIC_COLUMNS, rows, {"note": "closed_form is a lower bound, not an expectation"}


def cmd_couple_test(a):
    reports = [check_inclusion(a.trials, a.steps, a.seed, threads=a.threads),
               check_domination(a.trials, a.steps, a.seed, q=a.q, threads=a.threads)]
    rows = [metric(f"trials={r.trials},steps={r.steps}", f"{r.check}_violations", r.violations,
                   None, 0) for r in reports]
    summary = {"reports": [{"check": r.check, "trials": r.trials, "steps": r.steps,
                            "violations": r.violations, "first_violation": r.first_violation}
                           for r in reports]}
    if any(not r.ok for r in reports):
        raise GuardFailure((METRIC_COLUMNS, rows, summary), "coupling violations found")
    return METRIC_COLUMNS, rows, summary


# --- parsing ------------------------------------------------------------------

def _seed(text: str) -> int:
    if text == "random":
        return secrets.randbits(64)
    v = int(text)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64) or 'random'")
    return v


def _count(text: str) -> int:
    """Integer count; accepts forms like 1e6."""
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v) or v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {text}")
    return int(v)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=DEFAULT_SEED,
                        help=f"master seed (default {DEFAULT_SEED}; 'random' draws one)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default $CANYON_THREADS or 1)")
    common.add_argument("-o", "--output", default="-", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    p = argparse.ArgumentParser(prog="canyon", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"canyon {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_text):
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        sp.set_defaults(fn=fn)
        return sp

    s = add("simulate", cmd_simulate,
            "step-by-step trace; columns k,outcome,removed,minimum,size[,count_le_<q>...]")
    s.add_argument("--steps", type=_count, default=1000)
    s.add_argument("--mode", choices=("full", "restricted"), default="full")
    s.add_argument("--q", type=float, default=None, help="cutoff for restricted mode")
    s.add_argument("--stride", type=_count, default=1)
    s.add_argument("--thresholds", type=float, nargs="*", default=None,
                   help="uniform-coordinate thresholds for counts (full mode)")

    s = add("return-times", cmd_return_times, "mean return time to the empty state vs closed form")
    s.add_argument("--q", type=float, nargs="+", default=[0.5])
    s.add_argument("--n", type=_count, default=10**6)
    s.add_argument("--horizon", type=_count, default=10**8)

    s = add("delta-density", cmd_delta_density, "delta-symbol frequencies after burn-in")
    s.add_argument("--t", type=float, nargs="+", default=[0.2, 0.5, 0.8])
    s.add_argument("--steps", type=_count, default=10**7)
    s.add_argument("--burnin", type=_count, default=10**6)
    s.add_argument("--batches", type=_count, default=30)

    s = add("stationary", cmd_stationary, "regeneration-cycle summary of the restricted chain")
    s.add_argument("--q", type=float, nargs="+", default=[0.5])
    s.add_argument("--cycles", type=_count, default=10**5)
    s.add_argument("--horizon", type=_count, default=10**8)

    s = add("min-law", cmd_min_law, "stationary law of the restricted minimum; columns s,tail,...")
    s.add_argument("--q", type=float, default=0.5)
    s.add_argument("--n", type=_count, default=10**6, help="emitted states")
    s.add_argument("--grid", type=_count, default=100)
    s.add_argument("--horizon", type=_count, default=10**8)

    s = add("oracle", cmd_oracle, "exact return-time pmf as rational polynomials in q")
    s.add_argument("--kmax", type=_count, default=4)
    s.add_argument("--q", type=float, nargs="*", default=None, help="evaluate at these q")

    s = add("critical", cmd_critical, "bisection estimate of the critical point")
    s.add_argument("--lo", type=float, default=0.5)
    s.add_argument("--hi", type=float, default=0.75)
    s.add_argument("--probes", type=_count, default=10)
    s.add_argument("--horizon", type=_count, default=10**5)
    s.add_argument("--replicas", type=_count, default=10**4)
    s.add_argument("--tol", type=float, default=1e-3)

    s = add("tail", cmd_tail, "return-time tail exponent fit (conjecture check)")
    s.add_argument("--q", type=float, default=P_C)
    s.add_argument("--k", type=_count, nargs="*", default=None, help="explicit k grid")
    s.add_argument("--kmin-exp", type=int, default=6)
    s.add_argument("--kmax-exp", type=int, default=18)
    s.add_argument("--fit-lo", type=_count, default=None)
    s.add_argument("--fit-hi", type=_count, default=None)
    s.add_argument("--replicas", type=_count, default=10**5)
    s.add_argument("--bootstrap", type=_count, default=200)

    s = add("growth", cmd_growth, "linear growth of the count left of t > 1 vs its lower bound")
    s.add_argument("--t", type=float, nargs="+", default=[2.0])
    s.add_argument("--n", type=_count, default=10**6)

    s = add("couple-test", cmd_couple_test, "randomized coupling (monotonicity) checks")
    s.add_argument("--trials", type=_count, default=10**4)
    s.add_argument("--steps", type=_count, default=10**3)
    s.add_argument("--q", type=float, default=0.5, help="cutoff for the domination check")
    return p


def _inputs(args) -> dict:
    skip = {"fn", "output", "format", "threads", "command", "seed"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def write_output(args, cols, rows: Iterable[dict], summary: dict, stream) -> None:
    if args.format == "csv":
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in cols])
        return
    doc = {"schema": SCHEMA, "command": args.command, "version": __version__,
           "seed": args.seed, "inputs": _inputs(args), "columns": cols,
           "rows": list(rows), "summary": summary}
    json.dump(_json_value(doc), stream, indent=2, sort_keys=False)
    stream.write("\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    status = EXIT_OK
    try:
        try:
            cols, rows, summary = args.fn(args)
        except GuardFailure as g:
            (cols, rows, summary), msg = g.args
            print(f"canyon: guard failure: {msg}", file=sys.stderr)
            status = EXIT_GUARD
        except CensoredCycleError as exc:
            print(f"canyon: guard failure: {exc}", file=sys.stderr)
            return EXIT_GUARD
        if args.output == "-":
            write_output(args, cols, rows, summary, sys.stdout)
        else:
            buf = io.StringIO()
            write_output(args, cols, rows, summary, buf)
            with open(args.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(buf.getvalue())
    except (ValueError, TypeError, OverflowError, CostLimitError) as exc:
        print(f"canyon: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SimulationMemoryError as exc:
        print(f"canyon: out of memory: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        print(f"canyon: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL
    return status


if __name__ == "__main__":
    sys.exit(main())
