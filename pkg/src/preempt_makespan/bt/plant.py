"""Simulated insertion plant driving the twist-insert behavior tree.

The plant draws each attempt's schedule with the Monte Carlo attempt
sampler on the episode's counter stream, then exposes that schedule to the
tree only through time-gated actions: ``press`` completes when the current
iteration's deadline has passed and reports the resulting hand height, and
``classify`` reveals the verdict once its time has come.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..params import GuardedParams
from ..rng import EpisodeStream
from ..simulate import AttemptOutcome, SimConfig, sample_attempt
from .nodes import Status, TickContext

SEATED_Z = 0.01
UNSEATED_Z = 0.03
Z_TARGET = 0.02


@dataclass(frozen=True)
class AttemptSchedule:
    outcome: AttemptOutcome
    iteration_deadlines: tuple[float, ...]
    seats_on_last: bool
    verdict: str
    verdict_time: float


def plan_attempt(outcome: AttemptOutcome, retry_limit: int, iteration_s: float) -> AttemptSchedule:
    """Spread an attempt's terminal time over insertion-loop iterations.

    Failures use every allowed iteration; successes seat on iteration
    ``ceil(T / iteration_s)`` (at most ``retry_limit``).  Preempted attempts
    never reach a deadline.
    """
    verdict_time = outcome.verdict_time if outcome.verdict_time is not None else math.inf
    if outcome.preempted:
        return AttemptSchedule(outcome, (math.inf,), False, outcome.verdict, verdict_time)
    total = outcome.duration
    success = outcome.ground_truth == "success"
    if success:
        n = min(retry_limit, max(1, math.ceil(total / iteration_s)))
    else:
        n = retry_limit
    deadlines = tuple(total * k / n for k in range(1, n)) + (total,)
    return AttemptSchedule(outcome, deadlines, success, outcome.verdict, verdict_time)


class SimulatedPlant:
    def __init__(
        self,
        params: GuardedParams,
        cfg: SimConfig,
        episode: int = 0,
        tick_dt: float = 0.02,
        retry_limit: int = 6,
        iteration_s: float = 5.0,
    ) -> None:
        if tick_dt <= 0:
            raise ValueError("tick_dt must be > 0")
        self.params = params
        self.cfg = cfg
        self.tick_dt = tick_dt
        self.retry_limit = retry_limit
        self.iteration_s = iteration_s
        self.stream = EpisodeStream(cfg.seed, episode)
        self.schedule: AttemptSchedule | None = None
        self.ticks = 0
        self.iteration = 0
        self.observed_verdict = "none"
        self.observed_verdict_time: float | None = None
        self.twist_log: list[float] = []
        self.actions = {
            "record": self._record,
            "twist": self._twist,
            "relief_lift": self._relief_lift,
            "press": self._press,
            "classify": self._classify,
        }

    @property
    def elapsed(self) -> float:
        """Attempt time at the end of the current tick."""
        return self.ticks * self.tick_dt

    def start_attempt(self) -> AttemptSchedule:
        outcome = sample_attempt(
            self.stream, self.params, self.cfg.policy, self.cfg.floor_mode, self.cfg.record_verdicts
        )
        self.schedule = plan_attempt(outcome, self.retry_limit, self.iteration_s)
        self.ticks = 0
        self.iteration = 0
        self.observed_verdict = "none"
        self.observed_verdict_time = None
        return self.schedule

    def advance(self) -> None:
        self.ticks += 1

    @property
    def preemptive(self) -> bool:
        return self.cfg.policy == "preemptive"

    # -- actions ----------------------------------------------------------

    def _record(self, ctx: TickContext, state: dict) -> Status:
        ctx.blackboard.set("samples", ctx.blackboard.get("samples", 0.0) + 1.0)
        return Status.RUNNING

    def _twist(self, ctx: TickContext, state: dict) -> Status:
        self.twist_log.append(float(ctx.blackboard["twist_angle"]))
        return Status.SUCCESS

    def _relief_lift(self, ctx: TickContext, state: dict) -> Status:
        return Status.SUCCESS

    def _press(self, ctx: TickContext, state: dict) -> Status:
        sched = self.schedule
        if "k" not in state:
            state["k"] = self.iteration
        k = state["k"]
        deadlines = sched.iteration_deadlines
        if k < len(deadlines) and self.elapsed < deadlines[k]:
            return Status.RUNNING
        self.iteration += 1
        seated = sched.seats_on_last and k == len(deadlines) - 1
        ctx.blackboard.set("z", SEATED_Z if seated else UNSEATED_Z)
        return Status.SUCCESS

    def _classify(self, ctx: TickContext, state: dict) -> Status:
        sched = self.schedule
        if self.observed_verdict == "none" and sched.verdict != "none" and self.elapsed >= sched.verdict_time:
            self.observed_verdict = sched.verdict
            self.observed_verdict_time = self.elapsed
            ctx.blackboard.set("verdict", 1.0 if sched.verdict == "pos" else -1.0)
            if sched.verdict == "neg" and self.preemptive:
                ctx.post("preempt", self.elapsed)
        return Status.RUNNING
