"""Scalar parameters of the Reactive and Preemptive retry processes.

Timings are mean dwell times in seconds (each the reciprocal of a Poisson
rate).  Classifier behaviour is captured as a joint distribution over six
per-attempt events::

    TP   success, positive verdict before completion
    FN   success, negative verdict (preempted under the Preemptive policy)
    TN   failure, negative verdict (preempted)
    FP   failure, positive verdict (runs to failure)
    NCS  success before any verdict
    NCF  failure before any verdict
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

PROB_TOL = 1e-9

EVENTS = ("TP", "FN", "TN", "FP", "NCS", "NCF")
SUCCESS_EVENTS = ("TP", "FN", "NCS")
FAILURE_EVENTS = ("TN", "FP", "NCF")


class ParamError(ValueError):
    """Base class for parameter validation failures."""


class RangeError(ParamError):
    pass


class SumViolation(ParamError):
    pass


class RateMismatch(ParamError):
    pass


def _check_positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise RangeError(f"{name} must be a finite number > 0, got {value!r}")


def _check_probability(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and 0.0 <= value <= 1.0):
        raise RangeError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class TaskTimings:
    """Mean times (seconds) for an attempt to fail, succeed, or get a verdict."""

    mtf: float
    mts: float
    mtn: float
    mtp: float | None = None
    classification_floor: float = 7.0

    def __post_init__(self) -> None:
        _check_positive("mtf", self.mtf)
        _check_positive("mts", self.mts)
        _check_positive("mtn", self.mtn)
        if self.mtp is not None:
            _check_positive("mtp", self.mtp)
        floor = self.classification_floor
        if not (isinstance(floor, (int, float)) and math.isfinite(floor) and floor >= 0):
            raise RangeError(f"classification_floor must be >= 0, got {floor!r}")

    @property
    def failure_rate(self) -> float:
        return 1.0 / self.mtf

    @property
    def success_rate(self) -> float:
        return 1.0 / self.mts

    @property
    def negative_rate(self) -> float:
        return 1.0 / self.mtn


@dataclass(frozen=True)
class OutcomeRates:
    p_s: float
    p_f: float

    def __post_init__(self) -> None:
        _check_probability("p_s", self.p_s)
        _check_probability("p_f", self.p_f)
        if abs(self.p_s + self.p_f - 1.0) > PROB_TOL:
            raise SumViolation(f"p_s + p_f = {self.p_s + self.p_f!r}, expected 1")

    @classmethod
    def from_failure(cls, p_f: float) -> OutcomeRates:
        return cls(p_s=1.0 - p_f, p_f=p_f)


@dataclass(frozen=True)
class ConfusionSpec:
    """Joint per-attempt probabilities of the six classifier events.

    Construction only range-checks the entries; the sum and marginal checks
    live in :func:`validate_confusion` so that callers can build partial
    specs (e.g. while sweeping) and validate once.
    """

    p_tp: float
    p_fn: float
    p_tn: float
    p_fp: float
    p_ncs: float
    p_ncf: float

    def __post_init__(self) -> None:
        for name in ("p_tp", "p_fn", "p_tn", "p_fp", "p_ncs", "p_ncf"):
            _check_probability(name, getattr(self, name))

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        """Probabilities in canonical event order (TP, FN, TN, FP, NCS, NCF)."""
        return (self.p_tp, self.p_fn, self.p_tn, self.p_fp, self.p_ncs, self.p_ncf)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(EVENTS, self.as_tuple()))

    @property
    def success_mass(self) -> float:
        return self.p_tp + self.p_fn + self.p_ncs

    @property
    def failure_mass(self) -> float:
        return self.p_tn + self.p_fp + self.p_ncf

    @classmethod
    def perfect(cls, rates: OutcomeRates) -> ConfusionSpec:
        """Classifier that labels every attempt correctly before it ends."""
        return cls(p_tp=rates.p_s, p_fn=0.0, p_tn=rates.p_f, p_fp=0.0, p_ncs=0.0, p_ncf=0.0)

    @classmethod
    def silent(cls, rates: OutcomeRates) -> ConfusionSpec:
        """Classifier that never reaches a verdict."""
        return cls(p_tp=0.0, p_fn=0.0, p_tn=0.0, p_fp=0.0, p_ncs=rates.p_s, p_ncf=rates.p_f)


class Guard(str, enum.Enum):
    NONE = "none"
    MTN_CAPPED_BY_MTF = "mtn_capped_by_mtf"
    FN_AVERTED = "fn_averted"
    CLASSIFIER_INERT = "classifier_inert"


@dataclass(frozen=True)
class GuardedParams:
    """Parameters after the MTN guard conditions have been applied.

    ``timings`` keeps the caller's values; the effective negative-verdict
    costs are exposed separately because the two sides of the confusion
    matrix can be affected differently (``mtn_for_failures`` caps at MTF
    while a surviving FN still costs the full MTN).
    """

    timings: TaskTimings
    confusion: ConfusionSpec
    guard_applied: Guard
    source_confusion: ConfusionSpec = field(compare=False)

    @property
    def mtn_for_failures(self) -> float:
        return min(self.timings.mtn, self.timings.mtf)

    @property
    def mtn_for_successes(self) -> float:
        return self.timings.mtn

    @property
    def rates(self) -> OutcomeRates:
        return derive_outcome_rates(self.confusion)


def validate_confusion(spec: ConfusionSpec, rates: OutcomeRates | None = None) -> ConfusionSpec:
    """Check that ``spec`` is a proper joint distribution.

    If ``rates`` is given, the success and failure marginals of ``spec`` must
    match it.  Returns ``spec`` unchanged.
    """
    total = math.fsum(spec.as_tuple())
    if abs(total - 1.0) > PROB_TOL:
        raise SumViolation(f"confusion entries sum to {total!r}, expected 1")
    if rates is not None:
        if abs(spec.success_mass - rates.p_s) > PROB_TOL:
            raise RateMismatch(
                f"success marginal p_tp+p_fn+p_ncs = {spec.success_mass!r} != p_s = {rates.p_s!r}"
            )
        if abs(spec.failure_mass - rates.p_f) > PROB_TOL:
            raise RateMismatch(
                f"failure marginal p_tn+p_fp+p_ncf = {spec.failure_mass!r} != p_f = {rates.p_f!r}"
            )
    return spec


def derive_outcome_rates(spec: ConfusionSpec) -> OutcomeRates:
    # marginals are sums of three masses and can round one ulp past 1
    return OutcomeRates(p_s=min(spec.success_mass, 1.0), p_f=min(spec.failure_mass, 1.0))


def apply_guards(timings: TaskTimings, confusion: ConfusionSpec) -> GuardedParams:
    """Apply the MTN-vs-MTF/MTS guard conditions.

    * ``mtn >= mtf``: a negative verdict on a failing attempt cannot arrive
      before the failure itself, so TN attempts cost MTF.
    * ``mtn >= mts``: successes complete before a negative verdict, so FN
      mass runs to success (moved onto TP).
    * both: the classifier cannot change the process at all; every failure
      runs to MTF and returns, so the failure-side mass is folded into FP.
    """
    capped = timings.mtn >= timings.mtf
    averted = timings.mtn >= timings.mts
    c = confusion
    if capped and averted:
        guard = Guard.CLASSIFIER_INERT
        c = replace(c, p_tp=c.p_tp + c.p_fn, p_fn=0.0, p_fp=c.p_tn + c.p_fp + c.p_ncf,
                    p_tn=0.0, p_ncf=0.0)
    elif averted:
        guard = Guard.FN_AVERTED
        c = replace(c, p_tp=c.p_tp + c.p_fn, p_fn=0.0)
    elif capped:
        guard = Guard.MTN_CAPPED_BY_MTF
    else:
        guard = Guard.NONE
    return GuardedParams(timings=timings, confusion=c, guard_applied=guard, source_confusion=confusion)
