"""Kruskal-Wallis comparison of two makespan samples."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .simulate import EpisodeResult

# Below this point (x < df/2 + 1) the power series converges fast; above it
# the Lentz continued fraction does.
_MAX_ITER = 10_000
_EPS = 1e-16
_TINY = 1e-300


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class RankedSample:
    values: np.ndarray
    ranks: np.ndarray
    tie_sizes: tuple[int, ...]

    @property
    def tie_correction(self) -> float:
        n = self.values.size
        if n < 2:
            return 1.0
        t = np.asarray(self.tie_sizes, dtype=float)
        return 1.0 - float(np.sum(t**3 - t)) / (n**3 - n)


@dataclass(frozen=True)
class TestResult:
    h_statistic: float
    degrees_of_freedom: int
    p_value: float
    n_a: int
    n_b: int
    all_tied: bool = False

    def as_dict(self) -> dict:
        return {
            "h_statistic": self.h_statistic,
            "degrees_of_freedom": self.degrees_of_freedom,
            "p_value": self.p_value,
            "n_a": self.n_a,
            "n_b": self.n_b,
            "all_tied": self.all_tied,
        }


TestResult.__test__ = False  # keep pytest from collecting it


def rank_pooled(values: Sequence[float]) -> RankedSample:
    """Mid-ranks (1-based) of ``values`` and the sizes of their tie groups."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    sorted_x = x[order]
    ranks = np.empty(x.size)
    ties = []
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        ties.append(j - i + 1)
        i = j + 1
    return RankedSample(values=x, ranks=ranks, tie_sizes=tuple(ties))


def filter_trivial_episodes(episodes: Iterable[EpisodeResult]) -> list[EpisodeResult]:
    """Drop episodes made of one successful, unpreempted attempt.

    Those episodes look identical under either policy and only dilute the
    comparison.
    """
    out = []
    for ep in episodes:
        if len(ep.attempts) == 1:
            only = ep.attempts[0]
            if only.ground_truth == "success" and not only.preempted:
                continue
        out.append(ep)
    return out


def _gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by power series."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by modified Lentz."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a)."""
    if a <= 0:
        raise ValueError("a must be > 0")
    if x < 0:
        raise ValueError("x must be >= 0")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def chi2_sf(x: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if x < 0:
        raise ValueError("x must be >= 0")
    return min(1.0, max(0.0, gamma_q(df / 2.0, x / 2.0)))


def kruskal_wallis(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """Two-group Kruskal-Wallis H test with tie correction."""
    na, nb = len(a), len(b)
    if na == 0 or nb == 0 or na + nb < 3:
        raise InsufficientData(f"need two nonempty groups with >= 3 values total, got {na} and {nb}")
    ranked = rank_pooled(list(a) + list(b))
    n = na + nb
    correction = ranked.tie_correction
    if correction <= 0:
        return TestResult(0.0, 1, 1.0, na, nb, all_tied=True)
    ra = ranked.ranks[:na]
    rb = ranked.ranks[na:]
    h = 12.0 / (n * (n + 1)) * (na * ra.mean() ** 2 + nb * rb.mean() ** 2) - 3.0 * (n + 1)
    h = max(0.0, h / correction)
    return TestResult(h, 1, chi2_sf(h, 1), na, nb)


def compare_episodes(
    a: Iterable[EpisodeResult], b: Iterable[EpisodeResult], drop_trivial: bool = True
) -> TestResult:
    ea, eb = list(a), list(b)
    if drop_trivial:
        ea, eb = filter_trivial_episodes(ea), filter_trivial_episodes(eb)
    return kruskal_wallis([e.makespan for e in ea], [e.makespan for e in eb])
