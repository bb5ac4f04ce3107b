"""Parameter sweeps of predicted time saved, and policy crossover search.

Conditional classifier rates are rates within one ground-truth class:
``p_tp_rate`` is P(TP | success) and ``p_tn_rate`` is P(TN | failure).
Sweeping one of them fixes the class marginal and spreads the remaining
mass over the other two events of that class in their base ratio
(NCS:FN for successes, FP:NCF for failures).  If both of those are zero
the remainder goes to FN (resp. FP).  The joint axes ``p_tp`` and ``p_tn``
set the joint probability directly with the same redistribution.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .formulas import NeverSucceeds, Variant, time_saved
from .params import ConfusionSpec, ParamError, TaskTimings, validate_confusion

PROBABILITY_AXES = ("p_f", "p_tp_rate", "p_tn_rate", "p_tp", "p_tn")
TIMING_AXES = ("mtf", "mts", "mtn")
AXIS_NAMES = PROBABILITY_AXES + TIMING_AXES
SNAP_TOL = 1e-12


@dataclass(frozen=True)
class SweepAxis:
    name: str
    start: float
    stop: float
    steps: int

    def __post_init__(self) -> None:
        if self.name not in AXIS_NAMES:
            raise ValueError(f"unknown sweep axis {self.name!r}; expected one of {', '.join(AXIS_NAMES)}")
        if self.steps < 2:
            raise ValueError("a sweep axis needs at least 2 steps")
        if self.name in TIMING_AXES and min(self.start, self.stop) <= 0:
            raise ValueError(f"{self.name} axis must stay > 0")

    def values(self, base_value: float | None = None) -> np.ndarray:
        """Grid values; a value within rounding of ``base_value`` is snapped to it."""
        v = np.linspace(self.start, self.stop, self.steps)
        if self.name in PROBABILITY_AXES:
            v = np.clip(v, 0.0, 1.0)
        if base_value is not None:
            v[np.abs(v - base_value) <= SNAP_TOL] = base_value
        return v


def base_value(name: str, timings: TaskTimings, confusion: ConfusionSpec) -> float:
    c = confusion
    if name == "p_f":
        return c.failure_mass
    if name == "p_tp_rate":
        return c.p_tp / c.success_mass if c.success_mass > 0 else 0.0
    if name == "p_tn_rate":
        return c.p_tn / c.failure_mass if c.failure_mass > 0 else 0.0
    if name in ("p_tp", "p_tn"):
        return getattr(c, name)
    return getattr(timings, name)


def _split(remainder: float, a: float, b: float) -> tuple[float, float]:
    """Share ``remainder`` between two events in the ratio a:b (all to a if both are 0)."""
    if a + b <= 0:
        return remainder, 0.0
    return remainder * a / (a + b), remainder * b / (a + b)


def _scale_class(c: ConfusionSpec, success: bool, new_mass: float) -> ConfusionSpec:
    old = c.success_mass if success else c.failure_mass
    if old <= 0:
        raise ParamError(
            f"cannot rescale the {'success' if success else 'failure'} class: base mass is 0"
        )
    k = new_mass / old
    if success:
        return replace(c, p_tp=c.p_tp * k, p_fn=c.p_fn * k, p_ncs=c.p_ncs * k)
    return replace(c, p_tn=c.p_tn * k, p_fp=c.p_fp * k, p_ncf=c.p_ncf * k)


def apply_axis(
    name: str, value: float, timings: TaskTimings, confusion: ConfusionSpec
) -> tuple[TaskTimings, ConfusionSpec]:
    """Set one swept parameter, keeping the rest of the model as it was.

    A value equal to the current one returns the inputs untouched, so a
    grid cell at the operating point reproduces it exactly.
    """
    if value == base_value(name, timings, confusion):
        return timings, confusion
    c = confusion
    if name in TIMING_AXES:
        return replace(timings, **{name: value}), c
    if name == "p_f":
        c = _scale_class(c, True, 1.0 - value)
        c = _scale_class(c, False, value)
    elif name in ("p_tp_rate", "p_tp"):
        tp = value * c.success_mass if name == "p_tp_rate" else min(value, c.success_mass)
        fn, ncs = _split(c.success_mass - tp, c.p_fn, c.p_ncs)
        c = replace(c, p_tp=tp, p_fn=fn, p_ncs=ncs)
    elif name in ("p_tn_rate", "p_tn"):
        tn = value * c.failure_mass if name == "p_tn_rate" else min(value, c.failure_mass)
        fp, ncf = _split(c.failure_mass - tn, c.p_fp, c.p_ncf)
        c = replace(c, p_tn=tn, p_fp=fp, p_ncf=ncf)
    return timings, validate_confusion(c)


@dataclass(frozen=True)
class SweepCell:
    index: tuple[int, ...]
    coords: tuple[float, ...]
    reactive: float
    preemptive: float
    time_saved: float
    recommended: str
    guard_applied: str
    flag: str | None = None

    def as_dict(self, names: Sequence[str]) -> dict:
        doc: dict = dict(zip(names, self.coords))
        doc.update(
            reactive_s=self.reactive,
            preemptive_s=self.preemptive,
            time_saved_s=self.time_saved,
            recommended=self.recommended,
            guard_applied=self.guard_applied,
            flag=self.flag,
        )
        return doc


@dataclass(frozen=True)
class SweepGrid:
    axes: tuple[SweepAxis, ...]
    axis_values: tuple[np.ndarray, ...]
    cells: tuple[SweepCell, ...]
    variant: Variant
    base_timings: TaskTimings
    base_confusion: ConfusionSpec
    baseline_index: tuple[int, ...]
    shape: tuple[int, ...] = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape", tuple(len(v) for v in self.axis_values))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    def cell(self, index: tuple[int, ...]) -> SweepCell:
        return self.cells[int(np.ravel_multi_index(index, self.shape))]

    @property
    def baseline(self) -> SweepCell:
        return self.cell(self.baseline_index)

    def array(self, attr: str) -> np.ndarray:
        return np.array([getattr(c, attr) for c in self.cells], dtype=float).reshape(self.shape)

    def params_at(self, coords: Sequence[float]) -> tuple[TaskTimings, ConfusionSpec]:
        t, c = self.base_timings, self.base_confusion
        for name, v in zip(self.names, coords):
            t, c = apply_axis(name, v, t, c)
        return t, c


def evaluate_cell(
    timings: TaskTimings,
    confusion: ConfusionSpec,
    names: Sequence[str],
    coords: Sequence[float],
    variant: Variant = "renewal",
) -> tuple[float, float, float, str, str, str | None]:
    t, c = timings, confusion
    for name, v in zip(names, coords):
        t, c = apply_axis(name, v, t, c)
    try:
        advice = time_saved(None, t, c, variant)
    except NeverSucceeds as exc:
        return math.nan, math.nan, math.nan, "undefined", "none", f"never_succeeds: {exc}"
    return (
        advice.reactive_pred.seconds,
        advice.preemptive_pred.seconds,
        advice.time_saved,
        advice.recommended,
        advice.preemptive_pred.guard_applied.value,
        None,
    )


def run_sweep(
    timings: TaskTimings,
    confusion: ConfusionSpec,
    axes: Sequence[SweepAxis],
    variant: Variant = "renewal",
    workers: int = 1,
) -> SweepGrid:
    """Evaluate both policies over a 1- or 2-axis grid around a base model.

    Parameters not on an axis stay at their base values.  Cells where the
    task can never succeed are kept with NaN predictions and a flag.
    """
    axes = tuple(axes)
    if len(axes) not in (1, 2):
        raise ValueError("a sweep takes one or two axes")
    if len({a.name for a in axes}) != len(axes):
        raise ValueError("sweep axes must be distinct")
    validate_confusion(confusion)
    names = tuple(a.name for a in axes)
    bases = [base_value(a.name, timings, confusion) for a in axes]
    values = tuple(a.values(b) for a, b in zip(axes, bases))
    indices = list(itertools.product(*(range(len(v)) for v in values)))

    def run(index: tuple[int, ...]) -> SweepCell:
        coords = tuple(float(values[k][i]) for k, i in enumerate(index))
        return SweepCell(index, coords, *evaluate_cell(timings, confusion, names, coords, variant))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = tuple(pool.map(run, indices))
    else:
        cells = tuple(run(i) for i in indices)
    baseline = tuple(int(np.argmin(np.abs(v - b))) for v, b in zip(values, bases))
    return SweepGrid(axes, values, cells, variant, timings, confusion, baseline)


@dataclass(frozen=True)
class Crossover:
    """A sign change of time saved between two neighbouring cells."""

    axis: str
    lower: tuple[int, ...]
    upper: tuple[int, ...]
    zero: float
    zero_linear: float
    fixed: dict[str, float]

    def as_dict(self) -> dict:
        return {
            "axis": self.axis,
            "lower": list(self.lower),
            "upper": list(self.upper),
            "zero": self.zero,
            "zero_linear": self.zero_linear,
            "fixed": dict(self.fixed),
        }


def _saved_along(grid: SweepGrid, axis: int, at: tuple[float, ...]):
    def f(x: float) -> float:
        coords = list(at)
        coords[axis] = x
        return evaluate_cell(grid.base_timings, grid.base_confusion, grid.names, coords, grid.variant)[2]

    return f


def find_crossover(grid: SweepGrid, refine: bool = True, xtol: float = 1e-12) -> list[Crossover]:
    """Edges of the grid along which time saved changes sign.

    ``zero_linear`` interpolates linearly between the two cells.  With
    ``refine`` the closed-form difference is also solved on the edge with
    Brent's method and reported as ``zero``; otherwise ``zero`` is the
    linear estimate.  Exact zeros at a cell and flagged cells are not
    crossings.
    """
    saved = grid.array("time_saved")
    out = []
    for axis in range(len(grid.shape)):
        for index in itertools.product(*(range(n) for n in grid.shape)):
            if index[axis] + 1 >= grid.shape[axis]:
                continue
            upper = index[:axis] + (index[axis] + 1,) + index[axis + 1:]
            a, b = saved[index], saved[upper]
            if not (a * b < 0):
                continue
            xa = float(grid.axis_values[axis][index[axis]])
            xb = float(grid.axis_values[axis][upper[axis]])
            linear = xa + (xb - xa) * a / (a - b)
            zero = linear
            if refine:
                coords = tuple(float(grid.axis_values[k][i]) for k, i in enumerate(index))
                zero = float(brentq(_saved_along(grid, axis, coords), xa, xb, xtol=xtol))
            fixed = {
                grid.names[k]: float(grid.axis_values[k][i])
                for k, i in enumerate(index)
                if k != axis
            }
            out.append(Crossover(grid.names[axis], index, upper, zero, linear, fixed))
    return out


# -- output ---------------------------------------------------------------


def grid_to_csv(grid: SweepGrid) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(grid.names) + ["reactive_s", "preemptive_s", "time_saved_s", "recommended"])
    for cell in grid.cells:
        writer.writerow(
            [repr(x) for x in cell.coords]
            + [repr(cell.reactive), repr(cell.preemptive), repr(cell.time_saved), cell.recommended]
        )
    return buf.getvalue()


def grid_to_dict(grid: SweepGrid, crossovers: Sequence[Crossover] | None = None) -> dict:
    def nan_to_none(x: float) -> float | None:
        return None if isinstance(x, float) and math.isnan(x) else x

    cells = []
    for cell in grid.cells:
        doc = cell.as_dict(grid.names)
        for k in ("reactive_s", "preemptive_s", "time_saved_s"):
            doc[k] = nan_to_none(doc[k])
        cells.append(doc)
    return {
        "variant": grid.variant,
        "axes": [
            {"name": a.name, "start": a.start, "stop": a.stop, "steps": a.steps, "values": v.tolist()}
            for a, v in zip(grid.axes, grid.axis_values)
        ],
        "baseline_index": list(grid.baseline_index),
        "cells": cells,
        "crossovers": [c.as_dict() for c in (crossovers or [])],
    }


def grid_to_json(grid: SweepGrid, crossovers: Sequence[Crossover] | None = None) -> str:
    return json.dumps(grid_to_dict(grid, crossovers), indent=2)
