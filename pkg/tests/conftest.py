from __future__ import annotations

import pytest
from hypothesis import strategies as st

from preempt_makespan.params import ConfusionSpec, OutcomeRates, TaskTimings, apply_guards, derive_outcome_rates

WORKED_CONFUSION = ConfusionSpec(p_tp=0.4, p_fn=0.1, p_tn=0.3, p_fp=0.1, p_ncs=0.05, p_ncf=0.05)
WORKED_TIMINGS = TaskTimings(mtf=20.0, mts=10.0, mtn=5.0)


@pytest.fixture
def worked():
    return apply_guards(WORKED_TIMINGS, WORKED_CONFUSION)


@st.composite
def confusions(draw, min_success: float = 0.05):
    """Six joint probabilities summing to one with p_tp + p_ncs >= min_success."""
    w = [draw(st.floats(0.0, 1.0)) for _ in range(6)]
    w[0] += min_success * 2 + 1e-3
    total = sum(w)
    p = [x / total for x in w]
    p[5] = max(0.0, 1.0 - sum(p[:5]))
    return ConfusionSpec(*p)


@st.composite
def timings(draw, low: float = 1.0, high: float = 100.0):
    mean = st.floats(low, high)
    return TaskTimings(mtf=draw(mean), mts=draw(mean), mtn=draw(mean))


def rates_of(c: ConfusionSpec) -> OutcomeRates:
    return derive_outcome_rates(c)


def pytest_terminal_summary(terminalreporter) -> None:
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
