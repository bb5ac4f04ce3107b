from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special
from scipy import stats as sps

from preempt_makespan.simulate import AttemptOutcome, EpisodeResult
from preempt_makespan.stats import (
    InsufficientData,
    _gamma_cf,
    _gamma_series,
    chi2_sf,
    compare_episodes,
    filter_trivial_episodes,
    kruskal_wallis,
    rank_pooled,
)

OK = AttemptOutcome("success", "TP", 5.0, False)
FAIL = AttemptOutcome("failure", "FP", 7.0, False)
PRE = AttemptOutcome("success", "FN", 2.0, True, "neg", 2.0)


def test_filter_drops_single_success() -> None:
    single = EpisodeResult((OK,), 0)
    three = EpisodeResult((FAIL, FAIL, OK), 1)
    assert filter_trivial_episodes([single, three]) == [three]
    assert filter_trivial_episodes([]) == []


def test_filter_keeps_preempted_successes() -> None:
    ep = EpisodeResult((PRE, OK), 0)
    assert filter_trivial_episodes([ep]) == [ep]


def test_all_trivial_gives_insufficient_data() -> None:
    eps = [EpisodeResult((OK,), i) for i in range(5)]
    with pytest.raises(InsufficientData):
        compare_episodes(eps, eps)


def test_hand_example() -> None:
    r = kruskal_wallis([1, 2], [3, 4])
    assert r.h_statistic == pytest.approx(2.4, abs=1e-12)
    assert r.degrees_of_freedom == 1
    assert r.p_value == pytest.approx(0.1213, abs=1e-4)
    assert r.p_value == pytest.approx(sps.kruskal([1, 2], [3, 4]).pvalue, abs=1e-12)


def test_identical_groups() -> None:
    a = [3.0, 1.0, 4.0, 1.5, 9.0, 2.6]
    r = kruskal_wallis(a, list(a))
    assert r.h_statistic == pytest.approx(0.0, abs=1e-12)
    assert r.p_value == pytest.approx(1.0)


def test_all_tied() -> None:
    r = kruskal_wallis([1, 1], [1, 1])
    assert r.all_tied and r.p_value == 1.0


def test_insufficient_data() -> None:
    with pytest.raises(InsufficientData):
        kruskal_wallis([], [1.0, 2.0])
    with pytest.raises(InsufficientData):
        kruskal_wallis([1.0], [2.0])


def test_rank_pooled() -> None:
    r = rank_pooled([10, 20, 20, 30, 20])
    np.testing.assert_array_equal(r.ranks, [1, 3, 3, 5, 3])
    assert sorted(r.tie_sizes) == [1, 1, 3]
    assert r.ranks.sum() == 5 * 6 / 2


def test_chi2_known_values() -> None:
    assert chi2_sf(0.0, 1) == 1.0
    assert chi2_sf(3.841, 1) == pytest.approx(0.0500, abs=1e-4)
    assert chi2_sf(2.4, 1) == pytest.approx(float(special.erfc(np.sqrt(1.2))), abs=1e-12)


@given(st.floats(0.0, 200.0), st.integers(1, 30))
def test_chi2_matches_reference(x: float, df: int) -> None:
    assert abs(chi2_sf(x, df) - sps.chi2.sf(x, df)) < 1e-10


@given(st.floats(0.5, 40.0))
def test_gamma_branches_agree_at_switchover(a: float) -> None:
    x = a + 1.0
    assert abs((1.0 - _gamma_series(a, x)) - _gamma_cf(a, x)) < 1e-9


@given(st.floats(0.0, 50.0), st.floats(0.0, 5.0), st.integers(1, 10))
def test_chi2_monotone(x: float, dx: float, df: int) -> None:
    assert chi2_sf(x + dx, df) <= chi2_sf(x, df) + 1e-15
    assert chi2_sf(x, df + 1) >= chi2_sf(x, df) - 1e-15


def test_chi2_domain() -> None:
    with pytest.raises(ValueError):
        chi2_sf(-1.0, 1)
    with pytest.raises(ValueError):
        chi2_sf(1.0, 0)


samples = st.lists(st.integers(0, 20).map(float), min_size=1, max_size=30)


@given(samples, samples)
def test_kw_matches_reference(a: list[float], b: list[float]) -> None:
    if len(a) + len(b) < 3:
        return
    r = kruskal_wallis(a, b)
    if r.all_tied:
        assert len(set(a + b)) == 1
        return
    ref = sps.kruskal(a, b)
    assert r.h_statistic == pytest.approx(ref.statistic, rel=1e-9, abs=1e-12)
    assert r.p_value == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-12)
    assert 0.0 <= r.p_value <= 1.0


@given(samples, samples)
def test_kw_symmetric_and_rank_invariant(a: list[float], b: list[float]) -> None:
    if len(a) + len(b) < 3:
        return
    r = kruskal_wallis(a, b)
    swapped = kruskal_wallis(b, a)
    assert swapped.h_statistic == pytest.approx(r.h_statistic, abs=1e-9)
    assert swapped.p_value == pytest.approx(r.p_value, abs=1e-12)
    warped = kruskal_wallis(np.exp(np.asarray(a) / 4), np.exp(np.asarray(b) / 4))
    assert warped.h_statistic == pytest.approx(r.h_statistic, abs=1e-9)
