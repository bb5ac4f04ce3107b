from __future__ import annotations

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import WORKED_CONFUSION, WORKED_TIMINGS, confusions, rates_of, timings
from preempt_makespan.formulas import (
    TIE_TOLERANCE,
    NeverSucceeds,
    analyze,
    chain_derived_makespan,
    preemptive_makespan,
    reactive_makespan,
    time_saved,
)
from preempt_makespan.params import ConfusionSpec, Guard, OutcomeRates, TaskTimings, apply_guards


def test_reactive_no_failures() -> None:
    t = TaskTimings(mtf=20.0, mts=10.0, mtn=5.0)
    rates = OutcomeRates.from_failure(0.0)
    assert reactive_makespan(rates, t, "paper").seconds == pytest.approx(11.0)
    assert reactive_makespan(rates, t, "renewal").seconds == pytest.approx(10.0)


def test_reactive_half_failures() -> None:
    t = TaskTimings(mtf=20.0, mts=10.0, mtn=5.0)
    rates = OutcomeRates.from_failure(0.5)
    assert reactive_makespan(rates, t, "paper").seconds == pytest.approx(32.0)
    assert reactive_makespan(rates, t, "renewal").seconds == pytest.approx(30.0)


def test_reactive_never_succeeds() -> None:
    with pytest.raises(NeverSucceeds):
        reactive_makespan(OutcomeRates.from_failure(1.0), WORKED_TIMINGS)


def test_preemptive_perfect_classifier() -> None:
    params = apply_guards(TaskTimings(20.0, 10.0, 5.0), ConfusionSpec(1, 0, 0, 0, 0, 0))
    assert preemptive_makespan(params, "paper").seconds == pytest.approx(11.0)
    assert preemptive_makespan(params, "renewal").seconds == pytest.approx(10.0)


def test_preemptive_worked_example(worked) -> None:
    assert preemptive_makespan(worked, "paper").seconds == pytest.approx(21.0, rel=1e-12)
    assert preemptive_makespan(worked, "renewal").seconds == pytest.approx(9.5 / 0.45, rel=1e-12)
    assert chain_derived_makespan(worked) == pytest.approx(70 / 3, rel=1e-12)


def test_preemptive_never_succeeds() -> None:
    params = apply_guards(TaskTimings(20.0, 10.0, 5.0), ConfusionSpec(0, 0.5, 0.5, 0, 0, 0))
    with pytest.raises(NeverSucceeds):
        preemptive_makespan(params)


def test_unknown_variant() -> None:
    with pytest.raises(ValueError):
        reactive_makespan(OutcomeRates(1, 0), WORKED_TIMINGS, "exact")  # type: ignore[arg-type]


def test_perfect_classifier_time_saved() -> None:
    t = TaskTimings(mtf=30.0, mts=10.0, mtn=4.0)
    rates = OutcomeRates(0.6, 0.4)
    advice = time_saved(rates, t, ConfusionSpec.perfect(rates))
    assert advice.recommended == "preemptive"
    assert advice.time_saved == pytest.approx(0.4 * (30.0 - 4.0) / 0.6, rel=1e-12)


def test_no_failures_is_indifferent() -> None:
    rates = OutcomeRates(1.0, 0.0)
    c = ConfusionSpec(0.8, 0.0, 0.0, 0.0, 0.2, 0.0)
    advice = time_saved(rates, WORKED_TIMINGS, c)
    assert advice.recommended == "indifferent"
    assert abs(advice.time_saved) < TIE_TOLERANCE


def test_inert_classifier_saves_nothing() -> None:
    t = TaskTimings(mtf=20.0, mts=30.0, mtn=40.0)
    for variant in ("paper", "renewal"):
        advice = time_saved(None, t, WORKED_CONFUSION, variant)
        assert advice.preemptive_pred.guard_applied is Guard.CLASSIFIER_INERT
        assert advice.time_saved == 0.0
        assert advice.preemptive_pred.seconds == advice.reactive_pred.seconds


def test_time_saved_rejects_mismatched_rates() -> None:
    with pytest.raises(ValueError):
        time_saved(OutcomeRates(0.6, 0.4), WORKED_TIMINGS, WORKED_CONFUSION)


def test_analyze_report(worked) -> None:
    report = analyze(WORKED_TIMINGS, WORKED_CONFUSION)
    assert report["advice"]["recommended"] == "preemptive"
    assert report["advice"]["preemptive"]["seconds"] == pytest.approx(21.1111111, rel=1e-6)
    assert report["advice_paper"]["preemptive"]["seconds"] == pytest.approx(21.0)
    checks = report["chain_check"]
    for key in ("reactive_residual", "as_printed_residual", "chain_derived_residual"):
        assert checks[key] < 1e-9


@given(confusions(), timings())
def test_printed_minus_renewal_reactive_is_one_over_ps(c: ConfusionSpec, t: TaskTimings) -> None:
    rates = rates_of(c)
    diff = reactive_makespan(rates, t, "paper").seconds - reactive_makespan(rates, t, "renewal").seconds
    assert diff == pytest.approx(1.0 / rates.p_s, rel=1e-9)


@given(confusions(), timings())
def test_recommendation_is_argmin(c: ConfusionSpec, t: TaskTimings) -> None:
    advice = time_saved(None, t, c)
    saved = advice.reactive_pred.seconds - advice.preemptive_pred.seconds
    assert advice.time_saved == saved
    if abs(saved) < TIE_TOLERANCE:
        assert advice.recommended == "indifferent"
    else:
        assert advice.recommended == ("preemptive" if saved > 0 else "reactive")


@given(confusions(), timings())
def test_prediction_lower_bound(c: ConfusionSpec, t: TaskTimings) -> None:
    params = apply_guards(t, c)
    assert preemptive_makespan(params, "renewal").seconds >= min(t.mts, t.mtn) - 1e-9


def test_printed_formula_can_undercut_the_bound() -> None:
    # NCF is missing from the printed denominator, so heavy NCF mass drags it down
    c = ConfusionSpec(0.1, 0.0, 0.0, 0.0, 0.0, 0.9)
    t = TaskTimings(mtf=1.0, mts=4.0, mtn=3.0)
    params = apply_guards(t, c)
    assert preemptive_makespan(params, "paper").seconds < 3.0
    assert preemptive_makespan(params, "renewal").seconds >= 3.0


@given(
    confusions(),
    timings(),
    st.floats(0.0, 1.0),
)
def test_preemptive_nonincreasing_in_tp(c: ConfusionSpec, t: TaskTimings, share: float) -> None:
    # move part of the NCS mass onto TP, FN held fixed
    assume(t.mtn < t.mts)
    moved = c.p_ncs * share
    c2 = ConfusionSpec(c.p_tp + moved, c.p_fn, c.p_tn, c.p_fp, c.p_ncs - moved, c.p_ncf)
    a = preemptive_makespan(apply_guards(t, c)).seconds
    b = preemptive_makespan(apply_guards(t, c2)).seconds
    assert b <= a * (1 + 1e-12)


@given(confusions(), timings(), st.floats(0.0, 50.0))
def test_preemptive_nondecreasing_in_mtf(c: ConfusionSpec, t: TaskTimings, extra: float) -> None:
    t2 = TaskTimings(mtf=t.mtf + extra, mts=t.mts, mtn=t.mtn)
    a = preemptive_makespan(apply_guards(t, c)).seconds
    b = preemptive_makespan(apply_guards(t2, c)).seconds
    assert b >= a * (1 - 1e-12)
