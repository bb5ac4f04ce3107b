"""Dense absorbing Markov chain engine.

Chains are kept in canonical form: transient states first, then absorbing
states, so the transition matrix splits into ``Q`` (transient to transient)
and ``R`` (transient to absorbing).  The fundamental matrix
``N = (I - Q)^-1`` counts expected visits, and its row sums are the expected
number of steps to absorption.

The Reactive and Preemptive retry processes are encoded as jump processes
with a one-second step: each outcome branch gets a dwell state whose
self-loop probability is ``1 - 1/mean``, so the expected number of visits to
it equals the mean dwell in seconds.  The Run state itself contributes one
visit per attempt.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .params import GuardedParams, OutcomeRates, TaskTimings

ROW_TOL = 1e-9
RESIDUAL_TOL = 1e-9

ChainVariant = Literal["as_printed", "chain_derived"]


class ChainError(ValueError):
    pass


class NoAbsorbingState(ChainError):
    pass


class RowSumError(ChainError):
    pass


class UnreachableAbsorption(ChainError):
    pass


class SingularSystem(ChainError):
    pass


class DwellTooShort(ChainError):
    """A mean dwell below one step cannot be encoded as a self-loop."""


@dataclass(frozen=True)
class AbsorbingChain:
    state_labels: tuple[str, ...]
    q: np.ndarray
    r: np.ndarray
    time_costs: Mapping[tuple[str, str], float] = field(default_factory=dict)

    @property
    def n_transient(self) -> int:
        return self.q.shape[0]

    @property
    def transient_labels(self) -> tuple[str, ...]:
        return self.state_labels[: self.n_transient]

    @property
    def absorbing_labels(self) -> tuple[str, ...]:
        return self.state_labels[self.n_transient:]

    def index(self, label: str) -> int:
        return self.state_labels.index(label)

    def to_json(self) -> str:
        doc = {
            "state_labels": list(self.state_labels),
            "n_transient": self.n_transient,
            "q": self.q.tolist(),
            "r": self.r.tolist(),
            "time_costs": [[a, b, c] for (a, b), c in sorted(self.time_costs.items())],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> AbsorbingChain:
        doc = json.loads(text)
        m = int(doc["n_transient"])
        labels = tuple(doc["state_labels"])
        q = np.asarray(doc["q"], dtype=float).reshape(m, m)
        r = np.asarray(doc["r"], dtype=float).reshape(m, len(labels) - m)
        costs = {(a, b): float(c) for a, b, c in doc.get("time_costs", [])}
        return cls(state_labels=labels, q=q, r=r, time_costs=costs)


@dataclass(frozen=True)
class FundamentalMatrix:
    n: np.ndarray
    source_chain: AbsorbingChain


@dataclass(frozen=True)
class SojournVector:
    t: np.ndarray
    labels: tuple[str, ...]

    def __getitem__(self, label: str) -> float:
        return float(self.t[self.labels.index(label)])


def build_canonical(
    states: Sequence[str],
    transitions: Mapping[tuple[str, str], float] | Iterable[tuple[str, str, float]],
    time_costs: Mapping[tuple[str, str], float] | None = None,
) -> AbsorbingChain:
    """Arrange labelled transitions into canonical form.

    A state with no outgoing transitions (or only a self-loop of weight 1)
    is absorbing.  Transient states keep their relative order from
    ``states``.  Rows are checked, not normalized.
    """
    if isinstance(transitions, Mapping):
        edges = [(a, b, w) for (a, b), w in transitions.items()]
    else:
        edges = list(transitions)
    known = set(states)
    if len(known) != len(states):
        raise ChainError("duplicate state labels")
    out: dict[str, dict[str, float]] = {s: {} for s in states}
    for a, b, w in edges:
        if a not in known or b not in known:
            raise ChainError(f"transition {a!r}->{b!r} references an unknown state")
        if w < 0:
            raise ChainError(f"negative weight {w!r} on {a!r}->{b!r}")
        out[a][b] = out[a].get(b, 0.0) + float(w)

    def is_absorbing(s: str) -> bool:
        nz = {b: w for b, w in out[s].items() if w > 0}
        return not nz or (set(nz) == {s} and abs(nz[s] - 1.0) <= ROW_TOL)

    transient = [s for s in states if not is_absorbing(s)]
    absorbing = [s for s in states if is_absorbing(s)]
    if not absorbing:
        raise NoAbsorbingState("chain has no absorbing state")
    for s in transient:
        total = sum(out[s].values())
        if abs(total - 1.0) > ROW_TOL:
            raise RowSumError(f"outgoing weights of {s!r} sum to {total!r}")

    # every transient state must be able to reach an absorbing one
    reaches = set(absorbing)
    changed = True
    while changed:
        changed = False
        for s in transient:
            if s not in reaches and any(w > 0 and b in reaches for b, w in out[s].items()):
                reaches.add(s)
                changed = True
    stuck = [s for s in transient if s not in reaches]
    if stuck:
        raise UnreachableAbsorption(f"no path to absorption from {stuck}")

    ti = {s: i for i, s in enumerate(transient)}
    ai = {s: i for i, s in enumerate(absorbing)}
    q = np.zeros((len(transient), len(transient)))
    r = np.zeros((len(transient), len(absorbing)))
    for s in transient:
        for b, w in out[s].items():
            if b in ti:
                q[ti[s], ti[b]] += w
            else:
                r[ti[s], ai[b]] += w
    return AbsorbingChain(
        state_labels=tuple(transient + absorbing), q=q, r=r, time_costs=dict(time_costs or {})
    )


def _spectral_radius(q: np.ndarray) -> float:
    if q.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(q))))


def fundamental_matrix(chain: AbsorbingChain) -> FundamentalMatrix:
    q = np.asarray(chain.q, dtype=float)
    m = q.shape[0]
    if _spectral_radius(q) >= 1.0 - 1e-12:
        raise SingularSystem("spectral radius of Q is >= 1; the chain never absorbs")
    eye = np.eye(m)
    n = np.linalg.solve(eye - q, eye)
    residual = float(np.linalg.norm((eye - q) @ n - eye, ord=np.inf)) if m else 0.0
    if not residual < RESIDUAL_TOL * max(1.0, float(np.max(np.abs(n)))):
        raise SingularSystem(f"ill-conditioned solve, residual {residual:.3e}")
    # expected visit counts are nonnegative; clamp round-off
    n = np.where((n < 0) & (n > -1e-12), 0.0, n)
    return FundamentalMatrix(n=n, source_chain=chain)


def power_series_oracle(chain: AbsorbingChain, k: int) -> np.ndarray:
    """Partial sum ``I + Q + ... + Q^k`` of the visit-count series."""
    if k < 0:
        raise ValueError("k must be >= 0")
    q = np.asarray(chain.q, dtype=float)
    term = np.eye(q.shape[0])
    total = term.copy()
    for _ in range(k):
        term = term @ q
        total += term
    return total


def sojourn_times(fm: FundamentalMatrix) -> SojournVector:
    t = fm.n @ np.ones(fm.n.shape[0])
    return SojournVector(t=t, labels=fm.source_chain.transient_labels)


def expected_steps(chain: AbsorbingChain) -> SojournVector:
    """Solve ``(I - Q) t = 1`` directly, without forming ``N``."""
    q = np.asarray(chain.q, dtype=float)
    if _spectral_radius(q) >= 1.0 - 1e-12:
        raise SingularSystem("spectral radius of Q is >= 1; the chain never absorbs")
    t = np.linalg.solve(np.eye(q.shape[0]) - q, np.ones(q.shape[0]))
    return SojournVector(t=t, labels=chain.transient_labels)


# -- retry-process chains -------------------------------------------------

RUN = "Run"
DONE = "Done"


def _add_dwell(
    edges: list[tuple[str, str, float]],
    costs: dict[tuple[str, str], float],
    states: list[str],
    name: str,
    entry_prob: float,
    mean: float,
    exit_to: str,
) -> None:
    if entry_prob <= 0:
        return
    if mean < 1.0:
        raise DwellTooShort(f"{name}: mean dwell {mean!r} s is below the 1 s step")
    states.append(name)
    edges.append((RUN, name, entry_prob))
    stay = 1.0 - 1.0 / mean
    if stay > 0:
        edges.append((name, name, stay))
    edges.append((name, exit_to, 1.0 / mean))
    costs[(RUN, name)] = mean


def build_reactive_chain(rates: OutcomeRates, timings: TaskTimings) -> AbsorbingChain:
    """Jump-process chain for retry-until-success without prediction."""
    states = [RUN]
    edges: list[tuple[str, str, float]] = []
    costs: dict[tuple[str, str], float] = {}
    _add_dwell(edges, costs, states, "SuccessDwell", rates.p_s, timings.mts, DONE)
    _add_dwell(edges, costs, states, "FailDwell", rates.p_f, timings.mtf, RUN)
    states.append(DONE)
    return build_canonical(states, edges, costs)


def build_preemptive_chain(
    params: GuardedParams, variant: ChainVariant = "chain_derived"
) -> AbsorbingChain:
    """Jump-process chain for the Preemptive policy.

    ``as_printed`` sends non-classified failures to Done, which is what the
    closed-form preemptive equation computes (its denominator leaves NCF out
    of the returning mass).  ``chain_derived`` returns NCF attempts to Run
    like every other failure.
    """
    if variant not in ("as_printed", "chain_derived"):
        raise ValueError(f"unknown chain variant {variant!r}")
    c = params.confusion
    t = params.timings
    states = [RUN]
    edges: list[tuple[str, str, float]] = []
    costs: dict[tuple[str, str], float] = {}
    ncf_exit = DONE if variant == "as_printed" else RUN
    _add_dwell(edges, costs, states, "TP", c.p_tp, t.mts, DONE)
    _add_dwell(edges, costs, states, "NCS", c.p_ncs, t.mts, DONE)
    _add_dwell(edges, costs, states, "FN", c.p_fn, params.mtn_for_successes, RUN)
    _add_dwell(edges, costs, states, "TN", c.p_tn, params.mtn_for_failures, RUN)
    _add_dwell(edges, costs, states, "FP", c.p_fp, t.mtf, RUN)
    _add_dwell(edges, costs, states, "NCF", c.p_ncf, t.mtf, ncf_exit)
    states.append(DONE)
    return build_canonical(states, edges, costs)


def run_sojourn(chain: AbsorbingChain) -> float:
    """Expected seconds to absorption starting from Run."""
    return expected_steps(chain)[RUN]
