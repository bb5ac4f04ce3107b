"""Monte Carlo simulation of Reactive and Preemptive retry episodes.

Each attempt consumes exactly two draws from its episode stream: draw
``2a`` picks the event and draw ``2a + 1`` is a unit exponential that sets
every time in the attempt.  The attempt duration is ``shift + mean * e``;
a positive verdict on an attempt that is not preempted lands at
``min(duration, shift + mean_verdict * e)``, which keeps the verdict before
the terminal outcome while preserving its exponential marginal whenever the
verdict mean is the shorter one.

The vectorized :func:`monte_carlo` and the per-episode :func:`run_episode`
share the same attempt kernel, so they agree bit for bit.
"""

from __future__ import annotations

import math
from collections.abc import Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np

from .params import GuardedParams
from .rng import RNG_ID, EpisodeStream, counter_exponential, counter_uniform

Policy = Literal["reactive", "preemptive"]
FloorMode = Literal["none", "shifted"]

EVENT_LABELS = ("TP", "FN", "TN", "FP", "NCS", "NCF", "S", "F")
_SUCCESS = np.array([True, True, False, False, True, False, True, False])
_VERDICT_NONE, _VERDICT_POS, _VERDICT_NEG = 0, 1, 2
VERDICT_LABELS = ("none", "pos", "neg")
_EVENT_VERDICT = np.array([1, 2, 2, 1, 0, 0, 0, 0])


class AttemptLimitExceeded(RuntimeError):
    def __init__(self, episode: int, limit: int) -> None:
        super().__init__(f"episode {episode} did not finish within {limit} attempts")
        self.episode = episode
        self.limit = limit


@dataclass(frozen=True)
class AttemptOutcome:
    ground_truth: Literal["success", "failure"]
    event: str
    duration: float
    preempted: bool
    verdict: Literal["pos", "neg", "none"] = "none"
    verdict_time: float | None = None


@dataclass(frozen=True)
class EpisodeResult:
    attempts: tuple[AttemptOutcome, ...]
    episode: int = 0
    makespan: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "makespan", sum(a.duration for a in self.attempts))

    @property
    def events(self) -> tuple[str, ...]:
        return tuple(a.event for a in self.attempts)


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``record_verdicts`` only matters for the reactive policy: attempts are
    still run to completion, but events are drawn from the classifier's
    joint distribution and verdicts are logged, the way training data for
    parameter estimation is collected.
    """

    policy: Policy = "preemptive"
    n_episodes: int = 1000
    seed: int = 0
    max_attempts_per_episode: int = 1_000_000
    floor_mode: FloorMode = "none"
    record_verdicts: bool = False

    def __post_init__(self) -> None:
        if self.policy not in ("reactive", "preemptive"):
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.floor_mode not in ("none", "shifted"):
            raise ValueError(f"unknown floor_mode {self.floor_mode!r}")
        if self.n_episodes < 1:
            raise ValueError("n_episodes must be >= 1")
        if self.max_attempts_per_episode < 1:
            raise ValueError("max_attempts_per_episode must be >= 1")


@dataclass(frozen=True)
class MakespanStats:
    mean: float
    std: float
    min: float
    max: float
    n: int
    makespans: np.ndarray = field(repr=False, compare=False)
    attempt_counts: np.ndarray = field(repr=False, compare=False)
    episodes: tuple[EpisodeResult, ...] | None = field(default=None, repr=False, compare=False)
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def sem(self) -> float:
        return self.std / math.sqrt(self.n) if self.n > 1 else 0.0

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "sem": self.sem,
            "min": self.min,
            "max": self.max,
            "n": self.n,
            "mean_attempts": float(np.mean(self.attempt_counts)),
            "metadata": self.metadata,
        }


# -- attempt kernel -------------------------------------------------------


@dataclass(frozen=True)
class _Table:
    codes: np.ndarray        # event code per nonzero-probability slot
    bounds: np.ndarray       # inner cumulative boundaries for slot lookup
    mean: np.ndarray         # duration mean, indexed by event code
    shift: np.ndarray        # duration offset, indexed by event code
    v_mean: np.ndarray       # verdict mean, indexed by event code
    v_shift: np.ndarray
    preempt: np.ndarray      # bool, indexed by event code
    absorbing: float         # probability that an attempt ends the episode


@lru_cache(maxsize=256)
def _table(params: GuardedParams, policy: str, floor_mode: str, record: bool) -> _Table:
    t = params.timings
    floor = t.classification_floor if floor_mode == "shifted" else 0.0
    mtp = t.mtp if t.mtp is not None else t.mtn
    mean = np.zeros(8)
    shift = np.zeros(8)
    v_mean = np.zeros(8)
    v_shift = np.full(8, floor)
    preempt = np.zeros(8, dtype=bool)
    mean[[0, 1, 4, 6]] = t.mts
    mean[[2, 3, 5, 7]] = t.mtf
    v_mean[[0, 3]] = mtp
    v_mean[[1, 2]] = t.mtn
    if policy == "reactive" and not record:
        probs = [(6, params.rates.p_s), (7, params.rates.p_f)]
    elif policy == "reactive":
        probs = list(enumerate(params.source_confusion.as_tuple()))
    else:
        probs = list(enumerate(params.confusion.as_tuple()))
        mean[1] = params.mtn_for_successes
        mean[2] = params.mtn_for_failures
        shift[[1, 2]] = floor
        preempt[[1, 2]] = True
    nz = [(code, p) for code, p in probs if p > 0]
    codes = np.array([code for code, _ in nz], dtype=np.int64)
    bounds = np.cumsum([p for _, p in nz])[:-1]
    absorbing = sum(p for code, p in nz if _SUCCESS[code] and not preempt[code])
    return _Table(codes, bounds, mean, shift, v_mean, v_shift, preempt, absorbing)


def _attempt_kernel(tab: _Table, u: np.ndarray, e: np.ndarray):
    code = tab.codes[np.searchsorted(tab.bounds, u, side="right")]
    duration = tab.shift[code] + tab.mean[code] * e
    verdict = _EVENT_VERDICT[code].copy()
    verdict[code >= 6] = _VERDICT_NONE
    preempted = tab.preempt[code]
    v_time = np.where(
        preempted, duration, np.minimum(duration, tab.v_shift[code] + tab.v_mean[code] * e)
    )
    v_time = np.where(verdict == _VERDICT_NONE, np.nan, v_time)
    return code, duration, verdict, v_time, preempted


def _outcome(code: int, duration: float, verdict: int, v_time: float, preempted: bool) -> AttemptOutcome:
    return AttemptOutcome(
        ground_truth="success" if _SUCCESS[code] else "failure",
        event=EVENT_LABELS[code],
        duration=float(duration),
        preempted=bool(preempted),
        verdict=VERDICT_LABELS[verdict],
        verdict_time=None if verdict == _VERDICT_NONE else float(v_time),
    )


def sample_dwell(rng: EpisodeStream, mean: float) -> float:
    """Exponentially distributed dwell time with the given mean."""
    if not mean > 0:
        raise ValueError("mean must be > 0")
    return mean * rng.standard_exponential()


def sample_attempt(
    rng: EpisodeStream,
    params: GuardedParams,
    policy: Policy,
    floor_mode: FloorMode = "none",
    record_verdicts: bool = False,
) -> AttemptOutcome:
    tab = _table(params, policy, floor_mode, record_verdicts)
    u = np.array([rng.uniform()])
    e = np.array([rng.standard_exponential()])
    code, duration, verdict, v_time, preempted = _attempt_kernel(tab, u, e)
    return _outcome(int(code[0]), duration[0], int(verdict[0]), v_time[0], bool(preempted[0]))


def _ends_episode(outcome: AttemptOutcome) -> bool:
    return outcome.ground_truth == "success" and not outcome.preempted


def iter_attempts(
    params: GuardedParams, cfg: SimConfig, episode: int
) -> Iterator[AttemptOutcome]:
    """Attempts of one episode, in order, until the episode-ending success."""
    tab = _table(params, cfg.policy, cfg.floor_mode, cfg.record_verdicts)
    if tab.absorbing <= 0:
        raise AttemptLimitExceeded(episode, cfg.max_attempts_per_episode)
    rng = EpisodeStream(cfg.seed, episode)
    for _ in range(cfg.max_attempts_per_episode):
        outcome = sample_attempt(rng, params, cfg.policy, cfg.floor_mode, cfg.record_verdicts)
        yield outcome
        if _ends_episode(outcome):
            return
    raise AttemptLimitExceeded(episode, cfg.max_attempts_per_episode)


def run_episode(
    rng: EpisodeStream, params: GuardedParams, policy: Policy, cfg: SimConfig
) -> EpisodeResult:
    """Repeat attempts from ``rng`` until a success that is not preempted."""
    tab = _table(params, policy, cfg.floor_mode, cfg.record_verdicts)
    if tab.absorbing <= 0:
        raise AttemptLimitExceeded(rng.episode, cfg.max_attempts_per_episode)
    attempts = []
    for _ in range(cfg.max_attempts_per_episode):
        outcome = sample_attempt(rng, params, policy, cfg.floor_mode, cfg.record_verdicts)
        attempts.append(outcome)
        if _ends_episode(outcome):
            return EpisodeResult(tuple(attempts), episode=rng.episode)
    raise AttemptLimitExceeded(rng.episode, cfg.max_attempts_per_episode)


def _simulate_chunk(params: GuardedParams, cfg: SimConfig, start: int, stop: int, keep: bool):
    tab = _table(params, cfg.policy, cfg.floor_mode, cfg.record_verdicts)
    n = stop - start
    makespan = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    rounds = []
    a = 0
    while active.size:
        if a >= cfg.max_attempts_per_episode:
            raise AttemptLimitExceeded(int(start + active[0]), cfg.max_attempts_per_episode)
        episodes = start + active
        u = counter_uniform(cfg.seed, episodes, 2 * a)
        e = counter_exponential(cfg.seed, episodes, 2 * a + 1)
        code, duration, verdict, v_time, preempted = _attempt_kernel(tab, u, e)
        makespan[active] += duration
        counts[active] += 1
        if keep:
            rounds.append((active, code, duration, verdict, v_time, preempted))
        done = _SUCCESS[code] & ~preempted
        active = active[~done]
        a += 1
    episodes_out = None
    if keep:
        per_episode: list[list[AttemptOutcome]] = [[] for _ in range(n)]
        for active_r, code, duration, verdict, v_time, preempted in rounds:
            for j, idx in enumerate(active_r.tolist()):
                per_episode[idx].append(
                    _outcome(int(code[j]), duration[j], int(verdict[j]), v_time[j], preempted[j])
                )
        episodes_out = [EpisodeResult(tuple(att), episode=start + i) for i, att in enumerate(per_episode)]
    return makespan, counts, episodes_out


def monte_carlo(
    params: GuardedParams,
    cfg: SimConfig,
    workers: int = 1,
    keep_episodes: bool = False,
    chunk_size: int = 50_000,
) -> MakespanStats:
    """Simulate ``cfg.n_episodes`` episodes and summarize their makespans.

    Results depend only on ``(cfg, params)``; ``workers`` and ``chunk_size``
    change scheduling, never values.
    """
    tab = _table(params, cfg.policy, cfg.floor_mode, cfg.record_verdicts)
    if tab.absorbing <= 0:
        raise AttemptLimitExceeded(0, cfg.max_attempts_per_episode)
    bounds = [(s, min(s + chunk_size, cfg.n_episodes)) for s in range(0, cfg.n_episodes, chunk_size)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _simulate_chunk(params, cfg, *b, keep_episodes), bounds))
    else:
        parts = [_simulate_chunk(params, cfg, s, e, keep_episodes) for s, e in bounds]
    makespans = np.concatenate([p[0] for p in parts])
    counts = np.concatenate([p[1] for p in parts])
    episodes = None
    if keep_episodes:
        episodes = tuple(ep for p in parts for ep in p[2])
    return MakespanStats(
        mean=float(np.mean(makespans)),
        std=float(np.std(makespans, ddof=1)) if makespans.size > 1 else 0.0,
        min=float(np.min(makespans)),
        max=float(np.max(makespans)),
        n=int(makespans.size),
        makespans=makespans,
        attempt_counts=counts,
        episodes=episodes,
        metadata=sim_metadata(params, cfg),
    )


def sim_metadata(params: GuardedParams, cfg: SimConfig) -> dict:
    return {
        "rng": RNG_ID,
        "seed": cfg.seed,
        "n_episodes": cfg.n_episodes,
        "policy": cfg.policy,
        "floor_mode": cfg.floor_mode,
        "record_verdicts": cfg.record_verdicts,
        "guard_applied": params.guard_applied.value,
    }
