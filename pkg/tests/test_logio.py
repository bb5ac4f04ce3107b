from __future__ import annotations

import io
import json
import math
import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import WORKED_CONFUSION, WORKED_TIMINGS
from preempt_makespan.formulas import analyze
from preempt_makespan.logio import (
    CSV_COLUMNS,
    AttemptRecord,
    CoverageWarning,
    EmptyLog,
    InvariantViolation,
    NoSuccesses,
    ParseError,
    SchemaError,
    config_to_dict,
    episodes_from_records,
    estimate_params,
    format_attempt_log,
    parse_config,
    read_attempt_log,
    read_config,
    records_from_episodes,
    write_attempt_log,
    write_config,
)
from preempt_makespan.params import OutcomeRates, TaskTimings, apply_guards
from preempt_makespan.simulate import SimConfig, monte_carlo

HEADER = ",".join(CSV_COLUMNS) + "\n"


def _read(text: str):
    return read_attempt_log(io.StringIO(text))


def test_two_valid_rows() -> None:
    recs = _read(HEADER + "0,0,failure,neg,1.500000,1.500000\n0,1,success,none,,4.000000\n")
    assert len(recs) == 2
    assert recs[1].verdict_time_s is None and recs[1].event == "NCS"


def test_pos_verdict_without_time() -> None:
    with pytest.raises(InvariantViolation) as info:
        _read(HEADER + "0,0,success,pos,,4.0\n")
    assert info.value.line == 2


def test_parse_and_schema_errors() -> None:
    with pytest.raises(SchemaError):
        _read("")
    with pytest.raises(SchemaError):
        _read("a,b,c\n")
    with pytest.raises(ParseError) as info:
        _read(HEADER + "0,0,success,none,,4.0\nx,0,success,none,,4.0\n")
    assert info.value.line == 3
    with pytest.raises(ParseError):
        _read(HEADER + "0,0,success\n")
    with pytest.raises(InvariantViolation):
        _read(HEADER + "0,0,success,none,,0\n")
    with pytest.raises(InvariantViolation):
        _read(HEADER + "0,0,success,pos,5.0,4.0\n")
    with pytest.raises(InvariantViolation):
        _read(HEADER + "0,0,maybe,none,,4.0\n")


def test_empty_log_is_header_only() -> None:
    assert format_attempt_log([]) == HEADER


def test_write_is_deterministic(tmp_path) -> None:
    recs = [AttemptRecord(0, 0, "success", "pos", 1.25, 3.0)]
    path = tmp_path / "log.csv"
    write_attempt_log(recs, path)
    first = path.read_bytes()
    write_attempt_log(recs, path)
    assert path.read_bytes() == first
    assert first == (HEADER + "0,0,success,pos,1.250000,3.000000\n").encode()
    assert b"\r" not in first


def test_simulated_log_round_trip() -> None:
    params = apply_guards(WORKED_TIMINGS, WORKED_CONFUSION)
    st_ = monte_carlo(params, SimConfig(n_episodes=100, seed=3), keep_episodes=True)
    recs = records_from_episodes(st_.episodes)
    assert _read(format_attempt_log(recs)) == recs
    back = episodes_from_records(recs)
    assert [e.events for e in back] == [e.events for e in st_.episodes]
    assert [[a.preempted for a in e.attempts] for e in back] == [
        [a.preempted for a in e.attempts] for e in st_.episodes
    ]


def test_hand_tally() -> None:
    recs = [
        AttemptRecord(0, 0, "success", "pos", 5.0, 10.0),
        AttemptRecord(1, 0, "success", "none", None, 12.0),
        AttemptRecord(2, 0, "failure", "neg", 6.0, 6.0),
        AttemptRecord(3, 0, "failure", "pos", 4.0, 20.0),
    ]
    with pytest.warns(CoverageWarning):
        est = estimate_params(recs)
    c = est.confusion
    assert (c.p_tp, c.p_ncs, c.p_tn, c.p_fp) == (0.25, 0.25, 0.25, 0.25)
    assert (c.p_fn, c.p_ncf) == (0.0, 0.0)
    t = est.timings
    assert (t.mts, t.mtf, t.mtn, t.mtp) == (11.0, 13.0, 6.0, 4.5)
    assert est.rates == OutcomeRates(0.5, 0.5)


def test_estimate_errors() -> None:
    with pytest.raises(EmptyLog):
        estimate_params([])
    with pytest.raises(NoSuccesses):
        estimate_params([AttemptRecord(0, 0, "failure", "neg", 1.0, 1.0)])


def test_estimate_fallbacks() -> None:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est = estimate_params([AttemptRecord(0, 0, "success", "none", None, 4.0)])
    assert est.timings.mtf == 4.0 and est.timings.mtn == 4.0
    assert len(caught) == len(est.warnings) > 0


def test_estimates_recover_simulation_parameters() -> None:
    params = apply_guards(WORKED_TIMINGS, WORKED_CONFUSION)
    cfg = SimConfig(policy="reactive", n_episodes=55_000, seed=11, record_verdicts=True)
    st_ = monte_carlo(params, cfg, keep_episodes=True)
    est = estimate_params(records_from_episodes(st_.episodes))
    n = est.n_attempts
    assert n > 90_000
    for name, p in WORKED_CONFUSION.as_dict().items():
        got = getattr(est.confusion, "p_" + name.lower())
        assert abs(got - p) < 3 * math.sqrt(p * (1 - p) / n)
    assert est.timings.mts == pytest.approx(10.0, rel=0.02)
    assert est.timings.mtf == pytest.approx(20.0, rel=0.02)
    assert est.timings.mtn == pytest.approx(5.0, rel=0.03)


def test_minimal_config() -> None:
    doc = {
        "schema_version": 1,
        "timings": {"mtf": 20, "mts": 10, "mtn": 5},
        "confusion": {"p_tp": 0.4, "p_fn": 0.1, "p_tn": 0.3, "p_fp": 0.1, "p_ncs": 0.05, "p_ncf": 0.05},
    }
    t, c, r, sim = parse_config(doc)
    assert t == TaskTimings(20, 10, 5)
    assert c == WORKED_CONFUSION
    assert r.p_s == pytest.approx(0.55)
    assert sim == SimConfig()


def test_paper_mtn_threads_through(tmp_path) -> None:
    t = TaskTimings(mtf=62.0, mts=40.0, mtn=36.26)
    path = tmp_path / "cfg.json"
    write_config(path, t, WORKED_CONFUSION)
    t2, c2, _, _ = read_config(path)
    assert t2.mtn == 36.26
    assert analyze(t2, c2)["advice"]["preemptive"]["seconds"] > 0


def test_config_errors_carry_json_path() -> None:
    doc = config_to_dict(WORKED_TIMINGS, WORKED_CONFUSION)
    doc["timings"]["mtf"] = -1
    with pytest.raises(SchemaError) as info:
        parse_config(doc)
    assert info.value.path == "$.timings.mtf"
    doc = config_to_dict(WORKED_TIMINGS, WORKED_CONFUSION)
    doc["extra"] = 1
    with pytest.raises(SchemaError):
        parse_config(doc)
    doc = config_to_dict(WORKED_TIMINGS, WORKED_CONFUSION, OutcomeRates(0.6, 0.4))
    with pytest.raises(SchemaError) as info:
        parse_config(doc)
    assert info.value.path == "$.confusion"
    with pytest.raises(SchemaError):
        read_config(io.StringIO("{not json"))


# -- generated round trips -------------------------------------------------

_times = st.integers(1, 10**9).map(lambda n: n / 1e6)


@st.composite
def records(draw):
    gt = draw(st.sampled_from(["success", "failure"]))
    verdict = draw(st.sampled_from(["pos", "neg", "none"]))
    duration = draw(_times)
    vt = None
    if verdict != "none":
        vt = draw(st.integers(0, round(duration * 1e6))) / 1e6
    return AttemptRecord(draw(st.integers(0, 10**6)), draw(st.integers(0, 1000)), gt, verdict, vt, duration)


@given(st.lists(records(), max_size=40))
def test_csv_round_trip(recs: list[AttemptRecord]) -> None:
    assert _read(format_attempt_log(recs)) == recs


_pos = st.floats(1e-3, 1e4, allow_nan=False)


@st.composite
def configs(draw):
    w = [draw(st.floats(0, 1)) for _ in range(6)]
    w[0] += 0.01
    p = [x / sum(w) for x in w]
    p[5] = max(0.0, 1.0 - sum(p[:5]))
    t = TaskTimings(draw(_pos), draw(_pos), draw(_pos), draw(st.one_of(st.none(), _pos)), draw(st.floats(0, 60)))
    sim = SimConfig(
        policy=draw(st.sampled_from(["reactive", "preemptive"])),
        n_episodes=draw(st.integers(1, 10**6)),
        seed=draw(st.integers(0, 2**63)),
        floor_mode=draw(st.sampled_from(["none", "shifted"])),
        record_verdicts=draw(st.booleans()),
    )
    from preempt_makespan.params import ConfusionSpec

    return t, ConfusionSpec(*p), sim


@given(configs())
def test_config_round_trip(cfg) -> None:
    t, c, sim = cfg
    text = json.dumps(config_to_dict(t, c, None, sim))
    t2, c2, _, sim2 = read_config(io.StringIO(text))
    assert (t2, c2, sim2) == (t, c, sim)
