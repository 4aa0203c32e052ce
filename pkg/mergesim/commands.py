#!/usr/bin/env python
# coding: utf-8

import json
import logging
import os
import shutil
from dataclasses import replace
from pathlib import Path

import pandas as pd

from . import highd
from .config import ModelConfig, load_config
from .rewards import ObjectiveWeights, SocialOrientation
from .simulation import ScenarioConfig, run

""" Bodies of the command line subcommands. Each one returns the exit code:
0 on success, 2 when a run ends with a failure verdict. Errors propagate to
the caller which maps them to 1. """

__author__ = "mergesim developers"

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAILURE = 2

SCENARIO_DIR = Path(__file__).parent / "scenarios"
FORMATS = ("csv", "json")


def _atomic(path, write):
    tmp = path.with_name(path.name + ".tmp")
    write(tmp)
    os.replace(tmp, path)
    log.info("wrote %s", path)
    return path


def write_frame(frame, out, stem, fmt="csv"):
    """ write a table as stem.csv or stem.json in out """
    if fmt not in FORMATS:
        raise ValueError(f"format must be csv or json. format = {fmt}.")
    path = Path(out) / f"{stem}.{fmt}"
    if fmt == "csv":
        return _atomic(path, lambda p: frame.to_csv(p, index=False))
    return _atomic(path, lambda p: frame.to_json(p, orient="records"))


def write_json(data, out, stem):
    path = Path(out) / f"{stem}.json"

    def dump(p):
        with open(p, "w") as f:
            json.dump(data, f, indent=2)

    return _atomic(path, dump)


def _model(config_path, base):
    return load_config(config_path, base) if config_path else base


def simulate(scenario_path, out, seed=None, config_path=None, fmt="csv"):
    """ run one scenario file, write the state trace, the belief trace and
    the outcome summary """
    base = load_config(config_path) if config_path else None
    scenario = ScenarioConfig.load(scenario_path, base, seed)
    outcome = run(scenario)

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_frame(outcome.trace, out, "trace", fmt)
    write_frame(outcome.beliefs, out, "beliefs", fmt)
    write_json({**outcome.summary(), "seed": scenario.seed}, out, "outcome")
    return EXIT_OK if outcome.success else EXIT_FAILURE


def replay_eval(dataset_paths, out, seed=0, config_path=None, fmt="csv"):
    """ evaluate every merge episode of the recordings """
    model = _model(config_path, ModelConfig.replay())
    records = [highd.load(path) for path in dataset_paths]
    verdicts = [highd.evaluate_recording(record, model, seed) for record in records]
    verdicts = verdicts[0] if len(verdicts) == 1 else pd.concat(verdicts, ignore_index=True)
    summary = highd.summarize(verdicts)

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_frame(verdicts, out, "verdicts", fmt)
    write_frame(summary, out, "summary", fmt)
    total = summary.iloc[-1]
    print(f"{total['successes']}/{total['merges']} merges, success rate "
          f"{total['success_rate']:.1f} %")
    failed = verdicts[verdicts["verdict"] != "MergedSuccess"]
    for _, row in failed.iterrows():
        print(f"  {row['recording_id']} vehicle {row['vehicle_id']}: {row['verdict']}")
    return EXIT_OK if failed.empty else EXIT_FAILURE


def _record_model(record, config_path):
    base = replace(ModelConfig.replay(), road=highd.infer_road(record))
    return _model(config_path, base)


def infer(trajectory_path, vehicle_id, out, config_path=None, fmt="csv"):
    """ belief trace on one recorded vehicle, prints the final top 3 cells """
    record = highd.load(trajectory_path)
    record.track(vehicle_id)
    model = _record_model(record, config_path)
    beliefs, final = highd.infer_intent(record, vehicle_id, model)

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_frame(beliefs, out, f"beliefs_{vehicle_id}", fmt)
    for rank, (cell, p) in enumerate(final.top(3), start=1):
        print(f"{rank}. {cell.label} {p:.4f}")
    return EXIT_OK


def reproduce(trajectory_path, vehicle_id, sigma, w, out, config_path=None, fmt="csv"):
    """ virtual vehicle of intent (sigma, w) against the recorded traffic """
    sigma = SocialOrientation.from_label(sigma)
    w = ObjectiveWeights.parse(w) if isinstance(w, str) else ObjectiveWeights.normalized(w)
    record = highd.load(trajectory_path)
    record.track(vehicle_id)
    model = _record_model(record, config_path)
    result = highd.reproduce(record, vehicle_id, sigma, w, model)

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_frame(result.trace, out, f"reproduce_{vehicle_id}", fmt)
    write_json({"vehicle_id": vehicle_id, "sigma": sigma.value, "w": w.as_array().tolist(),
                "deviation": result.deviation, "best_cell": result.best_cell},
               out, f"reproduce_{vehicle_id}_summary")
    print(f"final position deviation {result.deviation:.2f} m, "
          f"filter best cell {result.best_cell}")
    return EXIT_OK


def gen_scenarios(out, episodes=10, seed=0):
    """ bundled scenario files and synthetic recordings """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for path in sorted(SCENARIO_DIR.glob("*.json")):
        _atomic(out / path.name, lambda p: shutil.copyfile(path, p))
    for kind in ("benign", "sealed"):
        record = highd.generate_recording(seed, episodes, kind)
        _atomic(out / f"{record.recording_id}.csv", lambda p: highd.write(record, p))
    return EXIT_OK
