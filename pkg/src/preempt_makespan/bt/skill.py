"""The twist-insert Preemptive Behavior Tree and its episode runner."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..params import GuardedParams
from ..simulate import AttemptLimitExceeded, AttemptOutcome, EpisodeResult, SimConfig
from .nodes import (
    Action,
    AlwaysSuccess,
    Blackboard,
    Condition,
    Expression,
    Node,
    Parallel,
    Retry,
    Sequence,
    Status,
    TickContext,
    assign_paths,
)
from .plant import Z_TARGET, SimulatedPlant

RETRY_LIMIT = 6
TICK_DT = 0.02
TWIST_DEG = 15.0

_LABELS = {
    ("success", "pos"): "TP",
    ("success", "neg"): "FN",
    ("success", "none"): "NCS",
    ("failure", "neg"): "TN",
    ("failure", "pos"): "FP",
    ("failure", "none"): "NCF",
}


def build_twist_insert_tree(retry_limit: int = RETRY_LIMIT) -> Node:
    """Top level runs recording, insertion and classification side by side.

    The insertion loop alternates the twist direction through two Expression
    nodes, twists, lifts slightly, presses, and checks the seated height.
    Physical sub-actions always report success; only "At Z" decides.
    """
    body = Sequence(
        [
            Expression("twist_sign", "1 - 2 * ($iter % 2)", name="TwistSign"),
            Expression("twist_angle", "$twist_sign * $twist_deg", name="TwistAngle"),
            AlwaysSuccess(Action("twist"), name="TwistOK"),
            AlwaysSuccess(Action("relief_lift"), name="ReliefOK"),
            AlwaysSuccess(Action("press"), name="PressOK"),
            Expression("iter", "$iter + 1", name="NextIter"),
            Condition("$z <= $z_target", name="AtZ"),
        ],
        memory=True,
        name="InsertIteration",
    )
    root = Parallel(
        [
            Action("record", name="Recording"),
            Retry(body, retry_limit, name="InsertionLoop"),
            Action("classify", name="Classifier"),
        ],
        main_child=1,
        halt_siblings=True,
        name="TwistInsert",
    )
    return assign_paths(root)


def initial_blackboard() -> dict[str, float]:
    return {
        "iter": 0.0,
        "twist_deg": TWIST_DEG,
        "z": 1.0,
        "z_target": Z_TARGET,
        "samples": 0.0,
        "verdict": 0.0,
    }


@dataclass
class PbtRun:
    episode: EpisodeResult
    trace: list[str] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)
    twist_log: list[float] = field(default_factory=list)
    ticks: int = 0


def _label(plant: SimulatedPlant, ground_truth: str) -> str:
    if plant.cfg.policy == "reactive" and not plant.cfg.record_verdicts:
        return "S" if ground_truth == "success" else "F"
    return _LABELS[(ground_truth, plant.observed_verdict)]


def _close_attempt(plant: SimulatedPlant, ground_truth: str, preempted: bool) -> AttemptOutcome:
    verdict = plant.observed_verdict
    return AttemptOutcome(
        ground_truth=ground_truth,
        event=_label(plant, ground_truth),
        duration=plant.elapsed,
        preempted=preempted,
        verdict=verdict,
        verdict_time=plant.observed_verdict_time,
    )


def run_pbt_episode(
    params: GuardedParams,
    cfg: SimConfig,
    seed: int | None = None,
    episode: int = 0,
    tick_dt: float = TICK_DT,
    tree: Node | None = None,
    record_trace: bool = False,
) -> PbtRun:
    """Tick the twist-insert tree until an attempt seats the part.

    Negative verdicts reach the runner through the context mailbox, which is
    drained at tick boundaries: the insertion subtree is halted and a fresh
    attempt starts on the next tick.  Attempt durations are whole ticks.
    """
    if seed is not None and seed != cfg.seed:
        cfg = SimConfig(
            policy=cfg.policy,
            n_episodes=cfg.n_episodes,
            seed=seed,
            max_attempts_per_episode=cfg.max_attempts_per_episode,
            floor_mode=cfg.floor_mode,
            record_verdicts=cfg.record_verdicts,
        )
    root = tree if tree is not None else build_twist_insert_tree()
    root.halt()
    plant = SimulatedPlant(params, cfg, episode, tick_dt=tick_dt)
    bb = Blackboard(initial_blackboard())
    ctx = TickContext(blackboard=bb, plant=plant, trace=[] if record_trace else None)
    attempts: list[AttemptOutcome] = []
    total_ticks = 0

    def next_attempt() -> None:
        if len(attempts) >= cfg.max_attempts_per_episode:
            raise AttemptLimitExceeded(episode, cfg.max_attempts_per_episode)
        root.halt()
        ctx.mailbox.clear()
        bb.set("iter", 0.0)
        plant.start_attempt()

    next_attempt()
    while True:
        preempt = [m for m in ctx.drain() if m[0] == "preempt"]
        if preempt:
            attempts.append(_close_attempt(plant, plant.schedule.outcome.ground_truth, True))
            if ctx.trace is not None:
                ctx.trace.append(f"{ctx.tick} preempt attempt {len(attempts) - 1}")
            next_attempt()
            continue
        plant.advance()
        total_ticks += 1
        ctx.tick = total_ticks
        bb.tick = total_ticks
        status = root.tick(ctx)
        if status is Status.RUNNING:
            continue
        ground_truth = "success" if status is Status.SUCCESS else "failure"
        attempts.append(_close_attempt(plant, ground_truth, False))
        if status is Status.SUCCESS:
            break
        next_attempt()

    result = EpisodeResult(tuple(attempts), episode=episode)
    return PbtRun(result, ctx.trace or [], ctx.diagnostics, plant.twist_log, total_ticks)
