"""Fuzzy start times: parse temporal modifiers, schedule, aggregate and fit."""

from .aggregate import (
    SatisfactionEnsemble,
    density_variance,
    mann_whitney_u,
    pointwise_mean,
    pointwise_median,
    pointwise_mode,
    pointwise_quantile,
    summarize,
)
from .fit import FitResult, best_fit, fit_bell, fit_trapezoid
from .model import (
    Bell,
    FuzzySkill,
    FuzzyTask,
    SampledFunction,
    SamplingGrid,
    SpecificSkill,
    Trapezoid,
    evaluate,
    to_sampled,
    transform,
)
from .nlparse import LookupConfig, TimeSpec, extract_time_spec, lookup_satisfaction
from .sched import (
    Schedule,
    SolverConfig,
    objective,
    solve_exhaustive,
    solve_hill_climb,
    solve_sim_anneal,
    to_specific,
)

__version__ = "0.1.0"
