"""Simulation and exact analysis of a rank-based particle chain.

Each step adds a uniform point on ``[0, 1]`` and, when the new point lies
right of the current minimum, removes that minimum.  Particles left of
``p_c = 1 - 1/e`` are eventually removed; particles right of it persist.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .coupling import (CouplingReport, check_domination, check_inclusion, dominates,
                       domination_holds, inclusion_holds, restriction_commutes)
from .criticality import (CriticalPointError, CriticalPointEstimate, SurvivalEstimate,
                          TailFit, empirical_growth, estimate_critical_point,
                          estimate_survival, estimate_tail_exponent, growth_bound,
                          running_max_min)
from .engine import (OUTSIDE, P_C, FullChain, FullConfig, Inside, Kind, Outcome,
                     RestrictedChain, RestrictedConfig, SimulationMemoryError, StepRecord,
                     count_in_range, exp_minimum, from_exp, induced_arrival, minimum,
                     restrict, run, sample_restricted_arrival, step_full, step_restricted,
                     to_exp)
from .excursions import (CensoredCycleError, DeltaDensities, DeltaSymbol, ExcursionSample,
                         MinLaw, classify_delta, closed_form_delta_densities,
                         closed_form_mean_return, estimate_delta_densities,
                         estimate_mean_return, sample_return_time, sample_return_times,
                         sample_stationary_states, stationary_min_law,
                         stationary_min_uniformity)
from .fenwick import ThresholdIndex
from .oracle import (CostLimitError, ProbPoly, eval_pmf, exact_return_pmf,
                     exact_return_pmf_bruteforce, pmf_from_json, pmf_to_json,
                     truncated_mean_check, truncated_mean_poly)
from .rng import RngStream
from .stats import EstimateWithCI, batch_means, clopper_pearson, iid_estimate

__all__ = [name for name in dir() if not name.startswith("_")]
