from __future__ import annotations

import json

import pytest

from conftest import WORKED_CONFUSION, WORKED_TIMINGS
from preempt_makespan.cli import main
from preempt_makespan.logio import read_attempt_log, write_config
from preempt_makespan.params import ConfusionSpec, TaskTimings
from preempt_makespan.rng import RNG_ID


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "cfg.json"
    write_config(path, WORKED_TIMINGS, WORKED_CONFUSION)
    return str(path)


def _run(capsys, *argv: str) -> tuple[int, str, str]:
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_json(capsys, cfg) -> None:
    code, out, _ = _run(capsys, "analyze", "--config", cfg, "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["advice"]["recommended"] == "preemptive"
    assert doc["advice_paper"]["preemptive"]["seconds"] == pytest.approx(21.0)
    assert doc["cross_check_residual"] < 1e-9
    meta = doc["metadata"]
    assert meta["rng"] == RNG_ID and meta["variant"] == "renewal" and meta["chain"] == "chain-derived"
    assert "version" in meta


def test_analyze_paper_operating_point(capsys, tmp_path) -> None:
    path = tmp_path / "paper.json"
    c = ConfusionSpec(0.462, 0.01, 0.384, 0.064, 0.03, 0.05)
    write_config(path, TaskTimings(mtf=62.09, mts=40.0, mtn=36.26), c)
    code, out, _ = _run(capsys, "analyze", "--config", str(path), "--json", "--chain", "as-printed")
    assert code == 0
    assert json.loads(out)["cross_check_residual"] < 1e-9


def test_analyze_human_output(capsys, cfg) -> None:
    code, out, _ = _run(capsys, "analyze", "--config", cfg)
    assert code == 0 and "recommended      preemptive" in out


def test_validation_errors_exit_2(capsys, tmp_path) -> None:
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 1, "timings": {"mtf": -1, "mts": 1, "mtn": 1}, "confusion": {}}')
    code, out, err = _run(capsys, "analyze", "--config", str(bad))
    assert code == 2 and out == "" and "error" in err
    with pytest.raises(SystemExit) as info:
        main(["analyze"])
    assert info.value.code == 2


def test_runtime_errors_exit_1(capsys, tmp_path) -> None:
    code, _, err = _run(capsys, "analyze", "--config", str(tmp_path / "missing.json"))
    assert code == 1 and "FileNotFoundError" in err


def test_simulate_compare_estimate(capsys, cfg, tmp_path) -> None:
    r_log, p_log = str(tmp_path / "r.csv"), str(tmp_path / "p.csv")
    code, out, _ = _run(capsys, "simulate", "--config", cfg, "--policy", "reactive", "--n", "400",
                        "--seed", "1", "--log", r_log, "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["n"] == 400 and doc["metadata"]["seed"] == 1 and doc["metadata"]["rng"] == RNG_ID
    code, _, _ = _run(capsys, "simulate", "--config", cfg, "--policy", "preemptive", "--n", "400",
                      "--seed", "2", "--log", p_log, "--threads", "2")
    assert code == 0
    code, out, _ = _run(capsys, "compare", r_log, p_log, "--json")
    assert code == 0
    result = json.loads(out)
    assert 0 <= result["p_value"] <= 1 and result["metadata"]["filtered"] is True
    code, out, _ = _run(capsys, "compare", r_log, p_log, "--json", "--no-filter")
    assert json.loads(out)["n_a"] == 400


def test_estimate_round_trip(capsys, cfg, tmp_path) -> None:
    log = str(tmp_path / "train.csv")
    out_cfg = str(tmp_path / "est.json")
    _run(capsys, "simulate", "--config", cfg, "--policy", "reactive", "--record-verdicts",
         "--n", "20000", "--seed", "4", "--log", log)
    code, out, _ = _run(capsys, "estimate", "--log", log, "--json", "--config-out", out_cfg)
    assert code == 0
    doc = json.loads(out)
    assert doc["rates"]["p_s"] == pytest.approx(0.55, abs=0.01)
    assert doc["timings"]["mtn"] == pytest.approx(5.0, rel=0.05)
    code, out, _ = _run(capsys, "analyze", "--config", out_cfg, "--json")
    assert code == 0


def test_sweep(capsys, cfg, tmp_path) -> None:
    grid_csv = tmp_path / "grid.csv"
    code, out, _ = _run(capsys, "sweep", "--config", cfg, "--axis", "p_f:0:0.9:10", "--axis", "mtn:1:9:3",
                        "--csv", str(grid_csv), "--json")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["cells"]) == 30 and doc["metadata"]["variant"] == "renewal"
    assert grid_csv.read_text().startswith("p_f,mtn,reactive_s")
    code, _, err = _run(capsys, "sweep", "--config", cfg, "--axis", "p_f:0:1")
    assert code == 2 and "axis" in err


def test_bt_run(capsys, tmp_path) -> None:
    path = tmp_path / "cfg.json"
    write_config(path, TaskTimings(8.0, 5.0, 2.0), WORKED_CONFUSION)
    trace = tmp_path / "trace.txt"
    log = tmp_path / "bt.csv"
    code, out, _ = _run(capsys, "bt-run", "--config", str(path), "--n", "3", "--seed", "5", "--json",
                        "--trace", str(trace), "--log", str(log))
    assert code == 0
    lines = [json.loads(x) for x in out.splitlines()]
    assert [x["episode"] for x in lines[:3]] == [0, 1, 2]
    assert lines[-1]["metadata"]["tick_dt"] == 0.02
    assert trace.read_text().startswith("# episode 0\n1 enter TwistInsert\n")
    assert len({r.episode_id for r in read_attempt_log(log)}) == 3
