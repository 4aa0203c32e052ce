# coding: utf-8

import json

import pandas as pd
import pytest

from app import main
from mergesim import highd
from mergesim.commands import SCENARIO_DIR


@pytest.fixture
def recordings(tmp_path):
    data = tmp_path / "data"
    assert main(["gen-scenarios", "--episodes", "2", "--seed", "0", "--out", str(data)]) == 0
    return data


def test_gen_scenarios(recordings):
    names = sorted(p.name for p in recordings.iterdir())
    assert names == ["empty_road.json", "five_vehicle.json", "synthetic_benign_0.csv",
                     "synthetic_sealed_0.csv"]
    assert not list(recordings.glob("*.tmp"))
    record = highd.load(recordings / "synthetic_benign_0.csv")
    assert len(highd.extract_merge_episodes(record)) == 2


def test_simulate_five_vehicle(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", str(SCENARIO_DIR / "five_vehicle.json"), "--out", str(out)]) == 0
    outcome = json.loads((out / "outcome.json").read_text())
    assert outcome["verdict"] == "MergedSuccess"
    assert outcome["seed"] == 0
    trace = pd.read_csv(out / "trace.csv")
    assert set(trace.vehicle_id) == {0, 1, 2, 3, 4}
    assert (out / "beliefs.csv").exists()


def test_simulate_empty_road_as_json(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", str(SCENARIO_DIR / "empty_road.json"), "--out", str(out),
                 "--format", "json", "--seed", "3"]) == 0
    outcome = json.loads((out / "outcome.json").read_text())
    assert outcome["merge_time"] == 2.
    assert outcome["seed"] == 3
    assert len(pd.read_json(out / "trace.json", orient="records")) == 3


def test_simulate_failure_verdict(tmp_path):
    scenario = tmp_path / "late.json"
    scenario.write_text(json.dumps({"vehicles": [
        {"id": 0, "controller": "planner", "x": 210., "lane": 0, "v_x": 20.}]}))
    out = tmp_path / "out"
    assert main(["simulate", str(scenario), "--out", str(out)]) == 2
    assert json.loads((out / "outcome.json").read_text())["verdict"] == "RampEndFailure"


@pytest.mark.parametrize("content", [
    "{not json",
    json.dumps({"vehicles": [{"id": 0, "controller": "planner", "x": 50., "lane": 0}]}),
    json.dumps({"vehicles": [{"id": 0, "controller": "planner", "x": 50., "lane": 0,
                              "v_x": 20.}], "traffic": "dense"}),
])
def test_malformed_scenario_writes_nothing(tmp_path, capsys, content):
    scenario = tmp_path / "bad.json"
    scenario.write_text(content)
    out = tmp_path / "out"
    assert main(["simulate", str(scenario), "--out", str(out)]) == 1
    assert not out.exists()
    assert capsys.readouterr().err.startswith("error:")


def test_missing_scenario_file(tmp_path):
    assert main(["simulate", str(tmp_path / "nowhere.json"), "--out", str(tmp_path / "out")]) == 1


def test_config_overrides(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"kinematics": {"t_lane": 4.}}))
    out = tmp_path / "out"
    assert main(["simulate", str(SCENARIO_DIR / "empty_road.json"), "--config", str(config),
                 "--out", str(out)]) == 0
    outcome = json.loads((out / "outcome.json").read_text())
    # a lane change now takes four steps
    assert outcome["merge_time"] >= 4.


def test_replay_eval_benign(recordings, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["replay-eval", str(recordings / "synthetic_benign_0.csv"),
                 "--out", str(out)]) == 0
    summary = pd.read_csv(out / "summary.csv")
    assert summary.iloc[-1]["success_rate"] == 100.
    assert len(pd.read_csv(out / "verdicts.csv")) == 2
    assert "2/2 merges" in capsys.readouterr().out


def test_replay_eval_sealed(recordings, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["replay-eval", str(recordings / "synthetic_sealed_0.csv"),
                 "--out", str(out)]) == 2
    verdicts = pd.read_csv(out / "verdicts.csv")
    assert set(verdicts.verdict) == {"RampEndFailure"}
    assert "RampEndFailure" in capsys.readouterr().out


def test_replay_eval_schema_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("frame,id,x\n0,1,0.\n")
    out = tmp_path / "out"
    assert main(["replay-eval", str(bad), "--out", str(out)]) == 1
    assert not out.exists()


def test_infer(recordings, tmp_path, capsys):
    record = highd.load(recordings / "synthetic_benign_0.csv")
    vehicle_id = record.vehicle_ids[1]
    out = tmp_path / "out"
    assert main(["infer", str(recordings / "synthetic_benign_0.csv"), str(vehicle_id),
                 "--out", str(out)]) == 0
    beliefs = pd.read_csv(out / f"beliefs_{vehicle_id}.csv")
    assert (beliefs.vehicle_id == vehicle_id).all()
    lines = capsys.readouterr().out.strip().splitlines()
    assert [line.split(".")[0] for line in lines[-3:]] == ["1", "2", "3"]


def test_infer_unknown_vehicle(recordings, tmp_path):
    out = tmp_path / "out"
    assert main(["infer", str(recordings / "synthetic_benign_0.csv"), "999",
                 "--out", str(out)]) == 1
    assert not out.exists()


def test_reproduce(recordings, tmp_path):
    record = highd.load(recordings / "synthetic_benign_0.csv")
    vehicle_id = record.vehicle_ids[1]
    out = tmp_path / "out"
    assert main(["reproduce", str(recordings / "synthetic_benign_0.csv"), str(vehicle_id),
                 "--sigma", "egoistic", "--w", "0,2/3,1/3", "--out", str(out)]) == 0
    summary = json.loads((out / f"reproduce_{vehicle_id}_summary.json").read_text())
    assert summary["sigma"] == "egoistic"
    assert summary["deviation"] >= 0.
    assert (out / f"reproduce_{vehicle_id}.csv").exists()


def test_reproduce_bad_sigma(recordings, tmp_path):
    assert main(["reproduce", str(recordings / "synthetic_benign_0.csv"), "2",
                 "--sigma", "selfish", "--w", "0,0,1", "--out", str(tmp_path / "out")]) == 1
