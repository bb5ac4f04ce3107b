"""Attempt logs (CSV), parameter estimation from logs, and JSON configs."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import IO, Any, Literal, Union

import jsonschema

from .params import (
    EVENTS,
    ConfusionSpec,
    OutcomeRates,
    ParamError,
    TaskTimings,
    derive_outcome_rates,
    validate_confusion,
)
from .simulate import AttemptOutcome, EpisodeResult, SimConfig

CSV_COLUMNS = ("episode_id", "attempt_idx", "ground_truth", "verdict", "verdict_time_s", "duration_s")
TIME_FORMAT = "%.6f"
MIN_DURATION = 1e-6
SCHEMA_VERSION = 1

Source = Union[str, "os.PathLike[str]", IO[str]]

_EVENT_OF = {
    ("success", "pos"): "TP",
    ("success", "neg"): "FN",
    ("success", "none"): "NCS",
    ("failure", "neg"): "TN",
    ("failure", "pos"): "FP",
    ("failure", "none"): "NCF",
}


class LogError(ValueError):
    pass


class ParseError(LogError):
    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class InvariantViolation(ParseError):
    pass


class SchemaError(LogError):
    def __init__(self, message: str, path: str = "$") -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


class EmptyLog(LogError):
    pass


class NoSuccesses(LogError):
    pass


class CoverageWarning(UserWarning):
    pass


@dataclass(frozen=True)
class AttemptRecord:
    episode_id: int
    attempt_idx: int
    ground_truth: Literal["success", "failure"]
    verdict: Literal["pos", "neg", "none"]
    verdict_time_s: float | None
    duration_s: float

    def __post_init__(self) -> None:
        problem = record_problem(self)
        if problem:
            raise ValueError(problem)

    @property
    def event(self) -> str:
        return _EVENT_OF[(self.ground_truth, self.verdict)]


def record_problem(r: AttemptRecord) -> str | None:
    """Describe the first broken record invariant, or return None."""
    if r.ground_truth not in ("success", "failure"):
        return f"ground_truth must be success or failure, got {r.ground_truth!r}"
    if r.verdict not in ("pos", "neg", "none"):
        return f"verdict must be pos, neg or none, got {r.verdict!r}"
    if r.episode_id < 0 or r.attempt_idx < 0:
        return "episode_id and attempt_idx must be >= 0"
    if not (math.isfinite(r.duration_s) and r.duration_s > 0):
        return f"duration_s must be > 0, got {r.duration_s!r}"
    if (r.verdict == "none") != (r.verdict_time_s is None):
        return "verdict_time_s must be empty exactly when verdict is none"
    if r.verdict_time_s is not None:
        if not (math.isfinite(r.verdict_time_s) and r.verdict_time_s >= 0):
            return f"verdict_time_s must be >= 0, got {r.verdict_time_s!r}"
        if r.verdict_time_s > r.duration_s:
            return f"verdict_time_s {r.verdict_time_s!r} exceeds duration_s {r.duration_s!r}"
    return None


# -- CSV ------------------------------------------------------------------


def _open_read(source: Source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, encoding="utf-8", newline=""), True
    return source, False


def _parse_int(text: str, column: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{column} is not an integer: {text!r}", line) from None


def _parse_float(text: str, column: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{column} is not a number: {text!r}", line) from None


def read_attempt_log(source: Source) -> list[AttemptRecord]:
    """Read and validate an attempt log; errors carry 1-based line numbers."""
    fh, owned = _open_read(source)
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file, expected a header row") from None
        if tuple(header) != CSV_COLUMNS:
            raise SchemaError(f"header must be {','.join(CSV_COLUMNS)}, got {','.join(header)}")
        records = []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(CSV_COLUMNS):
                raise ParseError(f"expected {len(CSV_COLUMNS)} fields, got {len(row)}", line)
            ep, idx, gt, verdict, vt, dur = row
            vt_value = None if vt == "" else _parse_float(vt, "verdict_time_s", line)
            try:
                rec = AttemptRecord(
                    episode_id=_parse_int(ep, "episode_id", line),
                    attempt_idx=_parse_int(idx, "attempt_idx", line),
                    ground_truth=gt,
                    verdict=verdict,
                    verdict_time_s=vt_value,
                    duration_s=_parse_float(dur, "duration_s", line),
                )
            except ValueError as exc:
                if isinstance(exc, ParseError):
                    raise
                raise InvariantViolation(str(exc), line) from None
            records.append(rec)
        return records
    finally:
        if owned:
            fh.close()


def format_attempt_log(records: Iterable[AttemptRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.episode_id,
                r.attempt_idx,
                r.ground_truth,
                r.verdict,
                "" if r.verdict_time_s is None else TIME_FORMAT % r.verdict_time_s,
                TIME_FORMAT % r.duration_s,
            ]
        )
    return buf.getvalue()


def write_attempt_log(records: Iterable[AttemptRecord], sink: Source) -> None:
    """Write records with fixed columns, 6-decimal times and LF line endings."""
    text = format_attempt_log(records)
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sink.write(text)


def _fixed(x: float) -> float:
    return float(TIME_FORMAT % x)


def records_from_episodes(episodes: Iterable[EpisodeResult]) -> list[AttemptRecord]:
    """Flatten simulated episodes into log records.

    Times are rounded to the log's 6-decimal resolution here, so writing the
    records and reading them back gives the same records.
    """
    out = []
    for ep in episodes:
        for i, a in enumerate(ep.attempts):
            duration = max(_fixed(a.duration), MIN_DURATION)
            vt = None if a.verdict_time is None else min(_fixed(a.verdict_time), duration)
            out.append(AttemptRecord(ep.episode, i, a.ground_truth, a.verdict, vt, duration))
    return out


def episodes_from_records(records: Iterable[AttemptRecord]) -> list[EpisodeResult]:
    """Group records by episode, ordered by attempt index.

    The log does not store whether an attempt was preempted; a negative
    verdict on any attempt but the last one is taken as a preemption.
    """
    grouped: dict[int, list[AttemptRecord]] = {}
    for r in records:
        grouped.setdefault(r.episode_id, []).append(r)
    out = []
    for ep_id in sorted(grouped):
        rows = sorted(grouped[ep_id], key=lambda r: r.attempt_idx)
        attempts = tuple(
            AttemptOutcome(
                ground_truth=r.ground_truth,
                event=r.event,
                duration=r.duration_s,
                preempted=r.verdict == "neg" and k < len(rows) - 1,
                verdict=r.verdict,
                verdict_time=r.verdict_time_s,
            )
            for k, r in enumerate(rows)
        )
        out.append(EpisodeResult(attempts, episode=ep_id))
    return out


# -- estimation -----------------------------------------------------------


@dataclass(frozen=True)
class EstimatedParams:
    timings: TaskTimings
    confusion: ConfusionSpec
    rates: OutcomeRates
    counts: dict[str, int]
    n_attempts: int
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def as_dict(self) -> dict:
        t = self.timings
        return {
            "timings": {"mtf": t.mtf, "mts": t.mts, "mtn": t.mtn, "mtp": t.mtp},
            "confusion": {name: getattr(self.confusion, name) for name in _CONFUSION_KEYS},
            "rates": {"p_s": self.rates.p_s, "p_f": self.rates.p_f},
            "counts": dict(self.counts),
            "n_attempts": self.n_attempts,
            "warnings": list(self.warnings),
        }


_CONFUSION_KEYS = ("p_tp", "p_fn", "p_tn", "p_fp", "p_ncs", "p_ncf")


def _mean(values: Sequence[float]) -> float | None:
    return math.fsum(values) / len(values) if values else None


def estimate_params(records: Sequence[AttemptRecord]) -> EstimatedParams:
    """Estimate model parameters from reactive attempts with recorded verdicts.

    Probabilities are event counts over all attempts.  MTF and MTS average
    the durations of every failure and success; MTN and MTP average the
    verdict times of negative and positive verdicts.  When a class needed
    for a mean is missing, a fallback is used and a CoverageWarning is
    issued: no failures gives MTF = MTS, and no negative verdicts gives
    MTN = max(MTF, MTS), which leaves the classifier without effect.
    """
    if not records:
        raise EmptyLog("attempt log has no records")
    n = len(records)
    counts = Counter(r.event for r in records)
    tallies = {e: counts.get(e, 0) for e in EVENTS}
    success_d = [r.duration_s for r in records if r.ground_truth == "success"]
    failure_d = [r.duration_s for r in records if r.ground_truth == "failure"]
    neg_t = [r.verdict_time_s for r in records if r.verdict == "neg"]
    pos_t = [r.verdict_time_s for r in records if r.verdict == "pos"]
    if not success_d:
        raise NoSuccesses("attempt log has no successful attempts")

    notes = []
    for e in EVENTS:
        if tallies[e] == 0:
            notes.append(f"no {e} attempts in the log; p_{e.lower()} estimated as 0")
    mts = _mean(success_d)
    mtf = _mean(failure_d)
    if mtf is None:
        mtf = mts
        notes.append("no failed attempts; MTF set to MTS")
    mtn = _mean(neg_t)
    if mtn is None:
        mtn = max(mtf, mts)
        notes.append("no negative verdicts; MTN set to max(MTF, MTS)")
    mtp = _mean(pos_t)
    for note in notes:
        warnings.warn(note, CoverageWarning, stacklevel=2)

    confusion = ConfusionSpec(
        p_tp=tallies["TP"] / n,
        p_fn=tallies["FN"] / n,
        p_tn=tallies["TN"] / n,
        p_fp=tallies["FP"] / n,
        p_ncs=tallies["NCS"] / n,
        p_ncf=tallies["NCF"] / n,
    )
    rates = OutcomeRates(p_s=len(success_d) / n, p_f=len(failure_d) / n)
    return EstimatedParams(
        timings=TaskTimings(mtf=mtf, mts=mts, mtn=mtn, mtp=mtp),
        confusion=confusion,
        rates=rates,
        counts=tallies,
        n_attempts=n,
        warnings=tuple(notes),
    )


# -- JSON config ----------------------------------------------------------

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_PROB = {"type": "number", "minimum": 0, "maximum": 1}

CONFIG_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "timings", "confusion"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "timings": {
            "type": "object",
            "additionalProperties": False,
            "required": ["mtf", "mts", "mtn"],
            "properties": {
                "mtf": _POSITIVE,
                "mts": _POSITIVE,
                "mtn": _POSITIVE,
                "mtp": {"anyOf": [_POSITIVE, {"type": "null"}]},
                "classification_floor": {"type": "number", "minimum": 0},
            },
        },
        "confusion": {
            "type": "object",
            "additionalProperties": False,
            "required": list(_CONFUSION_KEYS),
            "properties": {k: _PROB for k in _CONFUSION_KEYS},
        },
        "rates": {
            "type": "object",
            "additionalProperties": False,
            "required": ["p_s", "p_f"],
            "properties": {"p_s": _PROB, "p_f": _PROB},
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "policy": {"enum": ["reactive", "preemptive"]},
                "n_episodes": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "max_attempts_per_episode": {"type": "integer", "minimum": 1},
                "floor_mode": {"enum": ["none", "shifted"]},
                "record_verdicts": {"type": "boolean"},
            },
        },
    },
}


def _json_path(parts: Iterable[Any]) -> str:
    path = "$"
    for p in parts:
        path += f"[{p}]" if isinstance(p, int) else f".{p}"
    return path


Config = tuple[TaskTimings, ConfusionSpec, OutcomeRates, SimConfig]


def parse_config(doc: Any) -> Config:
    """Validate a decoded config document and build the model types."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise SchemaError(err.message, _json_path(err.absolute_path))
    section = "$.timings"
    try:
        timings = TaskTimings(**doc["timings"])
        section = "$.confusion"
        confusion = ConfusionSpec(**doc["confusion"])
        rates = OutcomeRates(**doc["rates"]) if "rates" in doc else None
        validate_confusion(confusion, rates)
        if rates is None:
            rates = derive_outcome_rates(confusion)
        section = "$.simulation"
        sim = SimConfig(**doc.get("simulation", {}))
    except (ParamError, ValueError) as exc:
        raise SchemaError(str(exc), section) from None
    return timings, confusion, rates, sim


def read_config(source: Source) -> Config:
    fh, owned = _open_read(source)
    try:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg} (line {exc.lineno})") from None
    finally:
        if owned:
            fh.close()
    return parse_config(doc)


def config_to_dict(
    timings: TaskTimings,
    confusion: ConfusionSpec,
    rates: OutcomeRates | None = None,
    sim: SimConfig | None = None,
) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "timings": {
            "mtf": timings.mtf,
            "mts": timings.mts,
            "mtn": timings.mtn,
            "mtp": timings.mtp,
            "classification_floor": timings.classification_floor,
        },
        "confusion": {k: getattr(confusion, k) for k in _CONFUSION_KEYS},
    }
    if rates is not None:
        doc["rates"] = {"p_s": rates.p_s, "p_f": rates.p_f}
    if sim is not None:
        doc["simulation"] = {
            "policy": sim.policy,
            "n_episodes": sim.n_episodes,
            "seed": sim.seed,
            "max_attempts_per_episode": sim.max_attempts_per_episode,
            "floor_mode": sim.floor_mode,
            "record_verdicts": sim.record_verdicts,
        }
    return doc


def write_config(
    sink: Source,
    timings: TaskTimings,
    confusion: ConfusionSpec,
    rates: OutcomeRates | None = None,
    sim: SimConfig | None = None,
) -> None:
    text = json.dumps(config_to_dict(timings, confusion, rates, sim), indent=2) + "\n"
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sink.write(text)
