"""Command-line entry point: ``preempt-makespan <subcommand> ...``.

Exit codes: 0 on success, 2 when inputs fail validation, 1 on any other
error.  With ``--json`` stdout carries a single JSON document (``bt-run``
prints one JSON object per episode); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from importlib import metadata
from typing import Any

from . import __version__
from .bt.nodes import MalformedTree, load_tree
from .bt.skill import TICK_DT, run_pbt_episode
from .expr import ExprError
from .formulas import NeverSucceeds, analyze
from .logio import (
    LogError,
    config_to_dict,
    episodes_from_records,
    estimate_params,
    read_attempt_log,
    read_config,
    records_from_episodes,
    write_attempt_log,
)
from .markov import ChainError
from .params import ParamError, apply_guards
from .rng import RNG_ID
from .simulate import SimConfig, monte_carlo
from .stats import InsufficientData, compare_episodes
from .sweep import SweepAxis, find_crossover, grid_to_csv, grid_to_dict, run_sweep

VALIDATION_ERRORS = (
    ParamError,
    LogError,
    ChainError,
    NeverSucceeds,
    InsufficientData,
    ExprError,
    MalformedTree,
)


class UsageError(ValueError):
    pass


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return __version__


def _metadata(args: argparse.Namespace, **extra: Any) -> dict:
    doc = {
        "tool": "preempt-makespan",
        "version": tool_version(),
        "command": args.command,
        "rng": RNG_ID,
    }
    for key in ("variant", "chain", "policy", "seed", "n", "floor_mode"):
        if hasattr(args, key):
            doc[key] = getattr(args, key)
    doc.update(extra)
    return doc


def _emit(args: argparse.Namespace, doc: dict, human: str) -> None:
    if args.json:
        json.dump(doc, sys.stdout, indent=2, default=float)
        sys.stdout.write("\n")
    else:
        sys.stdout.write(human)
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, default=float)
            fh.write("\n")


def _sim_config(args: argparse.Namespace, base: SimConfig, policy: str | None = None) -> SimConfig:
    return SimConfig(
        policy=policy or args.policy or base.policy,
        n_episodes=args.n if args.n is not None else base.n_episodes,
        seed=args.seed if args.seed is not None else base.seed,
        max_attempts_per_episode=base.max_attempts_per_episode,
        floor_mode=args.floor_mode or base.floor_mode,
        record_verdicts=args.record_verdicts or base.record_verdicts,
    )


# -- subcommands ----------------------------------------------------------


def cmd_analyze(args: argparse.Namespace) -> int:
    timings, confusion, rates, _ = read_config(args.config)
    report = analyze(timings, confusion, rates, args.variant)
    checks = report["chain_check"]
    if "error" in checks:
        raise ChainError(checks["error"])
    chain_key = "chain_derived_residual" if args.chain == "chain-derived" else "as_printed_residual"
    report["cross_check_residual"] = max(checks["reactive_residual"], checks[chain_key])
    report["metadata"] = _metadata(args)
    advice = report["advice"]
    human = (
        f"variant          {args.variant}\n"
        f"guard            {report['guard_applied']}\n"
        f"reactive         {advice['reactive']['seconds']:.4f} s\n"
        f"preemptive       {advice['preemptive']['seconds']:.4f} s\n"
        f"time saved       {advice['time_saved']:.4f} s\n"
        f"recommended      {advice['recommended']}\n"
        f"chain residual   {report['cross_check_residual']:.3e} ({args.chain})\n"
    )
    _emit(args, report, human)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    timings, confusion, _, sim = read_config(args.config)
    cfg = _sim_config(args, sim)
    params = apply_guards(timings, confusion)
    stats = monte_carlo(params, cfg, workers=args.threads, keep_episodes=bool(args.log))
    if args.log:
        write_attempt_log(records_from_episodes(stats.episodes), args.log)
    doc = stats.as_dict()
    doc["metadata"] = {**_metadata(args), **stats.metadata}
    human = (
        f"policy     {cfg.policy}\n"
        f"episodes   {stats.n}\n"
        f"mean       {stats.mean:.4f} s (sem {stats.sem:.4f})\n"
        f"std        {stats.std:.4f} s\n"
        f"range      {stats.min:.4f} .. {stats.max:.4f} s\n"
    )
    _emit(args, doc, human)
    return 0


def _parse_axis(text: str) -> SweepAxis:
    parts = text.split(":")
    if len(parts) != 4:
        raise UsageError(f"axis must look like name:start:stop:steps, got {text!r}")
    name, start, stop, steps = parts
    try:
        return SweepAxis(name, float(start), float(stop), int(steps))
    except ValueError as exc:
        raise UsageError(f"bad axis {text!r}: {exc}") from None


def cmd_sweep(args: argparse.Namespace) -> int:
    timings, confusion, _, _ = read_config(args.config)
    axes = [_parse_axis(a) for a in args.axis]
    grid = run_sweep(timings, confusion, axes, args.variant, workers=args.threads)
    crossings = find_crossover(grid)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(grid_to_csv(grid))
    doc = grid_to_dict(grid, crossings)
    doc["metadata"] = _metadata(args)
    human = grid_to_csv(grid) + "".join(
        f"crossover on {c.axis} at {c.zero:.6g} {c.fixed}\n" for c in crossings
    )
    _emit(args, doc, human)
    return 0


def cmd_estimate(args: argparse.Namespace) -> int:
    records = read_attempt_log(args.log)
    est = estimate_params(records)
    for note in est.warnings:
        print(f"warning: {note}", file=sys.stderr)
    if args.config_out:
        with open(args.config_out, "w", encoding="utf-8") as fh:
            json.dump(config_to_dict(est.timings, est.confusion, est.rates), fh, indent=2)
            fh.write("\n")
    doc = est.as_dict()
    doc["metadata"] = _metadata(args, source=str(args.log))
    t, r = est.timings, est.rates
    human = (
        f"attempts   {est.n_attempts}\n"
        f"p_s, p_f   {r.p_s:.4f}, {r.p_f:.4f}\n"
        f"MTS, MTF   {t.mts:.4f}, {t.mtf:.4f} s\n"
        f"MTN        {t.mtn:.4f} s\n"
        + "".join(f"{k:<10} {v}\n" for k, v in est.counts.items())
    )
    _emit(args, doc, human)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    a = episodes_from_records(read_attempt_log(args.log_a))
    b = episodes_from_records(read_attempt_log(args.log_b))
    result = compare_episodes(a, b, drop_trivial=not args.no_filter)
    doc = result.as_dict()
    doc["metadata"] = _metadata(args, filtered=not args.no_filter, log_a=str(args.log_a), log_b=str(args.log_b))
    human = (
        f"H          {result.h_statistic:.6g}\n"
        f"df         {result.degrees_of_freedom}\n"
        f"p          {result.p_value:.6g}\n"
        f"n          {result.n_a} vs {result.n_b}\n"
    )
    _emit(args, doc, human)
    return 0


def cmd_bt_run(args: argparse.Namespace) -> int:
    timings, confusion, _, sim = read_config(args.config)
    cfg = _sim_config(args, sim)
    params = apply_guards(timings, confusion)
    tree = None
    if args.tree:
        with open(args.tree, encoding="utf-8") as fh:
            tree = load_tree(fh.read())
    trace_fh = open(args.trace, "w", encoding="utf-8") if args.trace else None
    episodes = []
    try:
        for ep in range(cfg.n_episodes):
            run = run_pbt_episode(params, cfg, episode=ep, tick_dt=args.tick, tree=tree, record_trace=bool(trace_fh))
            episodes.append(run.episode)
            if trace_fh:
                trace_fh.write(f"# episode {ep}\n")
                trace_fh.writelines(line + "\n" for line in run.trace)
            for line in run.diagnostics:
                print(f"episode {ep}: {line}", file=sys.stderr)
            doc = {
                "episode": ep,
                "makespan": run.episode.makespan,
                "events": list(run.episode.events),
                "durations": [a.duration for a in run.episode.attempts],
                "ticks": run.ticks,
            }
            if args.json:
                sys.stdout.write(json.dumps(doc) + "\n")
            else:
                sys.stdout.write(f"{ep:>6} {run.episode.makespan:>12.4f} {' '.join(run.episode.events)}\n")
    finally:
        if trace_fh:
            trace_fh.close()
    if args.log:
        write_attempt_log(records_from_episodes(episodes), args.log)
    meta = _metadata(args, tick_dt=args.tick)
    if args.json:
        sys.stdout.write(json.dumps({"metadata": meta}) + "\n")
    return 0


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="preempt-makespan",
        description="Predict, simulate and compare retry makespans of reactive and preemptive policies.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {tool_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--json", action="store_true", help="machine-readable JSON on stdout")

    def model(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="JSON model config")
        p.add_argument("--variant", choices=("renewal", "paper"), default="renewal")

    def sim(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="JSON model config")
        p.add_argument("--policy", choices=("reactive", "preemptive"), default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--n", type=int, default=None, help="number of episodes")
        p.add_argument("--floor-mode", choices=("none", "shifted"), default=None)
        p.add_argument("--record-verdicts", action="store_true",
                       help="reactive runs draw and log classifier verdicts without acting on them")
        p.add_argument("--log", help="write the attempt log CSV here")

    p = sub.add_parser("analyze", help="closed-form makespans, advice and chain cross-check")
    model(p)
    p.add_argument("--chain", choices=("chain-derived", "as-printed"), default="chain-derived",
                   help="preemptive chain used for the residual")
    p.add_argument("-o", "--output", help="also write the JSON report here")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo makespan statistics")
    sim(p)
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("-o", "--output", help="also write the JSON summary here")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="time-saved grid over one or two parameters")
    model(p)
    p.add_argument("--axis", action="append", required=True, metavar="NAME:START:STOP:STEPS",
                   help="repeat for a second axis")
    p.add_argument("--csv", help="write the grid CSV here")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("-o", "--output", help="also write the JSON grid here")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("estimate", help="estimate model parameters from a reactive attempt log")
    p.add_argument("--log", required=True)
    p.add_argument("--config-out", help="write the estimates as a model config")
    p.add_argument("-o", "--output", help="also write the JSON estimates here")
    common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("compare", help="Kruskal-Wallis test between two attempt logs")
    p.add_argument("log_a")
    p.add_argument("log_b")
    p.add_argument("--no-filter", action="store_true", help="keep single-success episodes")
    p.add_argument("-o", "--output", help="also write the JSON result here")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bt-run", help="run episodes through the behavior tree executor")
    sim(p)
    p.add_argument("--tree", help="JSON tree (default: built-in twist-insert tree)")
    p.add_argument("--trace", help="write the tick status trace here")
    p.add_argument("--tick", type=float, default=TICK_DT, help="tick length in seconds")
    common(p)
    p.set_defaults(func=cmd_bt_run)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "n", None) is not None and args.n < 1:
        parser.error("--n must be >= 1")
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except (UsageError, *VALIDATION_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
