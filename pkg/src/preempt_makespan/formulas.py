"""Closed-form makespan predictions and the reactive-vs-preemptive decision.

Two variants are provided for each policy:

``paper``
    The published closed forms.  They carry a ``+1`` per attempt in the
    numerator, the cost of the instantaneous Run-state visit in the
    one-second jump-process encoding.
``renewal``
    Exact expected makespan of the retry loop as a renewal process,
    ``E[cost per attempt] / P(attempt ends the episode)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

from .markov import build_preemptive_chain, build_reactive_chain, run_sojourn
from .params import (
    ConfusionSpec,
    Guard,
    GuardedParams,
    OutcomeRates,
    TaskTimings,
    apply_guards,
    derive_outcome_rates,
    validate_confusion,
)

Variant = Literal["paper", "renewal"]
Policy = Literal["reactive", "preemptive"]

TIE_TOLERANCE = 0.01


class NeverSucceeds(ValueError):
    """The absorption probability per attempt is zero."""


@dataclass(frozen=True)
class MakespanPrediction:
    seconds: float
    variant: Variant
    policy: Policy
    guard_applied: Guard = Guard.NONE

    def as_dict(self) -> dict:
        return {
            "seconds": self.seconds,
            "variant": self.variant,
            "policy": self.policy,
            "guard_applied": self.guard_applied.value,
        }


@dataclass(frozen=True)
class PolicyAdvice:
    recommended: Literal["reactive", "preemptive", "indifferent"]
    time_saved: float
    reactive_pred: MakespanPrediction
    preemptive_pred: MakespanPrediction

    def as_dict(self) -> dict:
        return {
            "recommended": self.recommended,
            "time_saved": self.time_saved,
            "reactive": self.reactive_pred.as_dict(),
            "preemptive": self.preemptive_pred.as_dict(),
        }


def _check_variant(variant: str) -> None:
    if variant not in ("paper", "renewal"):
        raise ValueError(f"unknown variant {variant!r}; expected 'paper' or 'renewal'")


def reactive_makespan(
    rates: OutcomeRates, timings: TaskTimings, variant: Variant = "renewal"
) -> MakespanPrediction:
    """Expected makespan when every attempt runs to its terminal outcome."""
    _check_variant(variant)
    if rates.p_f >= 1.0 or rates.p_s <= 0.0:
        raise NeverSucceeds("p_f = 1: the task never succeeds")
    cost = timings.mtf * rates.p_f + timings.mts * rates.p_s
    if variant == "paper":
        cost = 1.0 + cost
    return MakespanPrediction(cost / (1.0 - rates.p_f), variant, "reactive")


def preemptive_makespan(params: GuardedParams, variant: Variant = "renewal") -> MakespanPrediction:
    """Expected makespan when negative verdicts abort the attempt.

    The ``paper`` variant keeps the published denominator
    ``1 - p_FN - p_FP - p_TN``, which leaves NCF mass out of the retry
    probability.  Under ``classifier_inert`` the prediction is the reactive
    one, bit for bit.
    """
    _check_variant(variant)
    if params.guard_applied is Guard.CLASSIFIER_INERT:
        r = reactive_makespan(params.rates, params.timings, variant)
        return MakespanPrediction(r.seconds, variant, "preemptive", params.guard_applied)
    c = params.confusion
    t = params.timings
    finishing = c.p_tp + c.p_ncs
    if finishing <= 0.0:
        raise NeverSucceeds("p_tp + p_ncs = 0: every success is preempted or absent")
    if params.mtn_for_failures == params.mtn_for_successes:
        negative = t.mtn * (c.p_fn + c.p_tn)
    else:
        negative = params.mtn_for_successes * c.p_fn + params.mtn_for_failures * c.p_tn
    cost = t.mtf * (c.p_fp + c.p_ncf) + t.mts * (c.p_tp + c.p_ncs) + negative
    if variant == "paper":
        seconds = (1.0 + cost) / (1.0 - c.p_fn - c.p_fp - c.p_tn)
    else:
        seconds = cost / finishing
    return MakespanPrediction(seconds, variant, "preemptive", params.guard_applied)


def advise(reactive: MakespanPrediction, preemptive: MakespanPrediction) -> PolicyAdvice:
    saved = reactive.seconds - preemptive.seconds
    if abs(saved) < TIE_TOLERANCE:
        rec = "indifferent"
    elif saved > 0:
        rec = "preemptive"
    else:
        rec = "reactive"
    return PolicyAdvice(rec, saved, reactive, preemptive)


def time_saved(
    rates: OutcomeRates | None,
    timings: TaskTimings,
    confusion: ConfusionSpec,
    variant: Variant = "renewal",
) -> PolicyAdvice:
    """Compare both policies under the same formula variant.

    ``rates`` may be omitted, in which case it is derived from the confusion
    marginals; if given it must agree with them.
    """
    validate_confusion(confusion, rates)
    if rates is None:
        rates = derive_outcome_rates(confusion)
    params = apply_guards(timings, confusion)
    return advise(reactive_makespan(rates, timings, variant), preemptive_makespan(params, variant))


def chain_derived_makespan(params: GuardedParams) -> float:
    """Closed form of the Run sojourn when NCF attempts also return to Run."""
    c = params.confusion
    return preemptive_makespan(params, "renewal").seconds + 1.0 / (c.p_tp + c.p_ncs)


def analyze(
    timings: TaskTimings,
    confusion: ConfusionSpec,
    rates: OutcomeRates | None = None,
    variant: Variant = "renewal",
) -> dict:
    """Full policy report: advice under ``variant`` and the other variant,
    plus the residuals of the closed forms against the matrix solver."""
    validate_confusion(confusion, rates)
    if rates is None:
        rates = derive_outcome_rates(confusion)
    params = apply_guards(timings, confusion)
    main = time_saved(rates, timings, confusion, variant)
    other_variant: Variant = "paper" if variant == "renewal" else "renewal"
    other = time_saved(rates, timings, confusion, other_variant)

    checks: dict[str, float | str] = {}
    try:
        reactive_chain = run_sojourn(build_reactive_chain(rates, timings))
        paper_reactive = reactive_makespan(rates, timings, "paper").seconds
        checks["reactive_chain_sojourn"] = reactive_chain
        checks["reactive_residual"] = abs(reactive_chain - paper_reactive) / paper_reactive
        printed = run_sojourn(build_preemptive_chain(params, "as_printed"))
        paper_pre = preemptive_makespan(params, "paper").seconds
        checks["as_printed_chain_sojourn"] = printed
        checks["as_printed_residual"] = abs(printed - paper_pre) / paper_pre
        derived = run_sojourn(build_preemptive_chain(params, "chain_derived"))
        derived_closed = chain_derived_makespan(params)
        checks["chain_derived_sojourn"] = derived
        checks["chain_derived_residual"] = abs(derived - derived_closed) / derived_closed
    except ValueError as exc:
        checks["error"] = str(exc)

    return {
        "variant": variant,
        "guard_applied": params.guard_applied.value,
        "rates": {"p_s": rates.p_s, "p_f": rates.p_f},
        "advice": main.as_dict(),
        f"advice_{other_variant}": other.as_dict(),
        "chain_check": checks,
    }
