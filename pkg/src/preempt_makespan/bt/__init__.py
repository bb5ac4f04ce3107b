"""Preemptive Behavior Tree engine and the simulated twist-insert skill."""

from .nodes import (
    Action,
    AlwaysSuccess,
    Blackboard,
    Condition,
    Expression,
    Fallback,
    MalformedTree,
    Node,
    Parallel,
    Retry,
    Sequence,
    Status,
    TickContext,
    assign_paths,
    dump_tree,
    load_tree,
    tree_from_dict,
    tree_to_dict,
)
from .plant import AttemptSchedule, SimulatedPlant, plan_attempt
from .skill import PbtRun, build_twist_insert_tree, run_pbt_episode

__all__ = [
    "Action",
    "AlwaysSuccess",
    "AttemptSchedule",
    "Blackboard",
    "Condition",
    "Expression",
    "Fallback",
    "MalformedTree",
    "Node",
    "Parallel",
    "PbtRun",
    "Retry",
    "Sequence",
    "SimulatedPlant",
    "Status",
    "TickContext",
    "assign_paths",
    "build_twist_insert_tree",
    "dump_tree",
    "load_tree",
    "plan_attempt",
    "run_pbt_episode",
    "tree_from_dict",
    "tree_to_dict",
]
