"""Makespan prediction for reactive and preemptive retry policies."""

from __future__ import annotations

__version__ = "0.1.0"

from .formulas import (
    MakespanPrediction,
    NeverSucceeds,
    PolicyAdvice,
    advise,
    analyze,
    chain_derived_makespan,
    preemptive_makespan,
    reactive_makespan,
    time_saved,
)
from .params import (
    ConfusionSpec,
    Guard,
    GuardedParams,
    OutcomeRates,
    ParamError,
    TaskTimings,
    apply_guards,
    derive_outcome_rates,
    validate_confusion,
)
from .simulate import EpisodeResult, MakespanStats, SimConfig, monte_carlo, run_episode

__all__ = [
    "ConfusionSpec",
    "EpisodeResult",
    "Guard",
    "GuardedParams",
    "MakespanPrediction",
    "MakespanStats",
    "NeverSucceeds",
    "OutcomeRates",
    "ParamError",
    "PolicyAdvice",
    "SimConfig",
    "TaskTimings",
    "__version__",
    "advise",
    "analyze",
    "apply_guards",
    "chain_derived_makespan",
    "derive_outcome_rates",
    "monte_carlo",
    "preemptive_makespan",
    "reactive_makespan",
    "run_episode",
    "time_saved",
    "validate_confusion",
]
