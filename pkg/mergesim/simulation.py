#!/usr/bin/env python
# coding: utf-8

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import pandas as pd

from .behavior import InteractionValues
from .config import SECTIONS, ModelConfig, ScenarioError, config_from_dict, read_json
from .intent import GRID, init_belief, reconstruct_action, update
from .planner import plan
from .rewards import ObjectiveWeights, SocialOrientation, collision_flag
from .world import (ACTIONS, RAMP_LANE, DriverAction, TrafficSnapshot, VehicleState,
                    step)

""" This module implements the closed loop world. The ego vehicle is driven
by the planner and the other vehicles by the behavior model, at constant
speed or by verbatim playback of a recorded track. Every step records the
states, the applied actions, the ego action values and the beliefs. """

__author__ = "mergesim developers"

__all__ = ["TrafficSnapshot", "Verdict", "VehicleSpec", "ScenarioConfig", "SimOutcome",
           "adjacency", "make_snapshot", "classify", "run"]

log = logging.getLogger(__name__)

CONTROLLERS = ("planner", "behavior", "replay", "constant-speed")
MODES = ("argmax", "sample")

# lateral distance to y_r under which the ego counts as merged
MERGE_TOLERANCE = 0.1

Q_COLUMNS = [f"q_{a.label}" for a in ACTIONS]
TRACE_COLUMNS = ["time", "vehicle_id", "x", "y", "v_x", "action"] + Q_COLUMNS


class Verdict(Enum):
    MERGED_SUCCESS = "MergedSuccess"
    COLLISION = "Collision"
    RAMP_END_FAILURE = "RampEndFailure"
    TIMEOUT = "Timeout"

    @property
    def success(self):
        return self is Verdict.MERGED_SUCCESS


def _state(values, where):
    try:
        x, y, v_x = (float(v) for v in values)
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}: a state is [x, y, v_x]. state = {values}.")
    return VehicleState(x=x, y=y, v_x=v_x)


@dataclass(frozen=True)
class VehicleSpec:
    """ One vehicle of a scenario.

    Args:
        vehicle_id (int): identifier, the planner vehicle is the ego
        initial (VehicleState): state at step 0, taken from the track for
            replayed vehicles
        controller (str): planner, behavior, replay or constant-speed
        sigma, w: intent of a behavior vehicle
        mode (str): argmax or sample, for behavior vehicles
        track (tuple): recorded state at every step, None where the vehicle
            is absent, for replayed vehicles
        merging (bool): uses the on-ramp traveling time mix, by default
            vehicles starting on the ramp
    """
    vehicle_id: int
    initial: Optional[VehicleState] = None
    controller: str = "behavior"
    sigma: Optional[SocialOrientation] = None
    w: Optional[ObjectiveWeights] = None
    mode: str = "argmax"
    track: tuple = ()
    merging: Optional[bool] = None

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ValueError(
                f"controller must be one of {', '.join(CONTROLLERS)}. controller = {self.controller}.")
        if self.controller == "replay":
            if not self.track:
                raise ValueError(f"replayed vehicle {self.vehicle_id} needs a track.")
            object.__setattr__(self, "track", tuple(self.track))
            object.__setattr__(self, "initial", self.track[0])
        elif self.initial is None:
            raise ValueError(f"vehicle {self.vehicle_id} needs an initial state.")
        if self.controller == "behavior":
            if self.sigma is None:
                raise ValueError(f"behavior vehicle {self.vehicle_id} needs sigma.")
            if self.w is None:
                if self.sigma is not SocialOrientation.ALTRUISTIC:
                    raise ValueError(f"behavior vehicle {self.vehicle_id} needs w.")
                object.__setattr__(self, "w", ObjectiveWeights.uniform())
        if self.mode not in MODES:
            raise ValueError(f"mode must be argmax or sample. mode = {self.mode}.")

    def state_at(self, t):
        """ recorded state at step t, replayed vehicles only """
        return self.track[t] if t < len(self.track) else None

    @classmethod
    def from_dict(cls, data, road):
        where = f"vehicle {data.get('id', '?')}"
        known = {"id", "x", "y", "lane", "v_x", "controller", "sigma", "w", "mode", "track",
                 "merging"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ScenarioError(f"{where}: unknown keys {', '.join(unknown)}.")
        try:
            controller = data.get("controller", "behavior")
            initial = None
            if controller != "replay":
                if "lane" in data and "y" not in data:
                    y = road.lane_center(int(data["lane"]))
                else:
                    y = data["y"]
                initial = _state((data["x"], y, data["v_x"]), where)
            track = tuple(None if s is None else _state(s, where) for s in data.get("track", ()))
            sigma = data.get("sigma")
            w = data.get("w")
            if isinstance(w, str):
                w = ObjectiveWeights.parse(w)
            elif w is not None:
                w = ObjectiveWeights.normalized(w)
            return cls(
                vehicle_id=int(data["id"]),
                initial=initial,
                controller=controller,
                sigma=None if sigma is None else SocialOrientation.from_label(sigma),
                w=w,
                mode=data.get("mode", "argmax"),
                track=track,
                merging=data.get("merging"),
            )
        except KeyError as e:
            raise ScenarioError(f"{where}: missing key {e}.")
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"{where}: {e}")

    def to_dict(self):
        data = {"id": self.vehicle_id, "controller": self.controller}
        if self.controller == "replay":
            data["track"] = [None if s is None else [s.x, s.y, s.v_x] for s in self.track]
        else:
            data.update(x=self.initial.x, y=self.initial.y, v_x=self.initial.v_x)
        if self.sigma is not None:
            data["sigma"] = self.sigma.value
            data["w"] = self.w.as_array().tolist()
            data["mode"] = self.mode
        if self.merging is not None:
            data["merging"] = self.merging
        return data


@dataclass(frozen=True)
class ScenarioConfig:
    vehicles: tuple
    model: ModelConfig = field(default_factory=ModelConfig)
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        vehicles = tuple(self.vehicles)
        ids = [v.vehicle_id for v in vehicles]
        if len(set(ids)) != len(ids):
            raise ScenarioError(f"vehicle ids must be unique. ids = {ids}.")
        planners = [v.vehicle_id for v in vehicles if v.controller == "planner"]
        if len(planners) != 1:
            raise ScenarioError(f"a scenario needs exactly one planner vehicle. got {planners}.")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ScenarioError(f"seed must be a nonnegative integer. seed = {self.seed}.")
        object.__setattr__(self, "vehicles", vehicles)

    @property
    def ego_id(self):
        return next(v.vehicle_id for v in self.vehicles if v.controller == "planner")

    @classmethod
    def from_dict(cls, data, base=None, seed=None):
        known = set(SECTIONS) | {"name", "seed", "vehicles"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {', '.join(unknown)}.")
        model = config_from_dict(data, base)
        vehicles = data.get("vehicles")
        if not isinstance(vehicles, list) or not vehicles:
            raise ScenarioError("a scenario needs a nonempty list of vehicles.")
        vehicles = tuple(VehicleSpec.from_dict(v, model.road) for v in vehicles)
        return cls(vehicles=vehicles, model=model,
                   seed=data.get("seed", 0) if seed is None else seed,
                   name=data.get("name", "scenario"))

    @classmethod
    def load(cls, path, base=None, seed=None):
        return cls.from_dict(read_json(path), base, seed)

    def to_dict(self):
        m = self.model
        safety = m.reward.safety
        reward = {k: v for k, v in m.reward.__dict__.items() if k != "safety"}
        kinematics = dict(m.kinematics.__dict__)
        kinematics["disturbance_cov"] = [list(row) for row in m.kinematics.disturbance_cov]
        return {
            "name": self.name,
            "seed": self.seed,
            "road": dict(m.road.__dict__),
            "kinematics": kinematics,
            "safety": dict(safety.__dict__),
            "reward": reward,
            "behavior": dict(m.behavior.__dict__),
            "planner": dict(m.planner.__dict__),
            "simulation": dict(m.simulation.__dict__),
            "vehicles": [v.to_dict() for v in self.vehicles],
        }


@dataclass
class SimOutcome:
    verdict: Verdict
    merge_time: float
    trace: pd.DataFrame
    beliefs: pd.DataFrame
    steps: int
    name: str = "scenario"

    @property
    def success(self):
        return self.verdict.success

    def summary(self):
        return {
            "name": self.name,
            "verdict": self.verdict.value,
            "merge_time": None if np.isnan(self.merge_time) else float(self.merge_time),
            "steps": int(self.steps),
        }


def _adjacency(states, lanes, radius):
    ids = sorted(states)
    adjacent = {i: set() for i in ids}
    for n, i in enumerate(ids):
        for j in ids[n + 1:]:
            if (abs(states[j].x - states[i].x) <= radius
                    and abs(lanes[i] - lanes[j]) <= 1):
                adjacent[i].add(j)
                adjacent[j].add(i)
    return {i: frozenset(v) for i, v in adjacent.items()}


def adjacency(snapshot, radius=100.):
    """ A(i) of every vehicle: within radius along x, in the same or an
    adjacent lane. The ramp is adjacent to lane 1. """
    if not radius > 0:
        raise ValueError(f"radius must be positive. radius = {radius}.")
    return _adjacency(snapshot.states, snapshot.lanes, radius)


def make_snapshot(time, states, road, radius=100., merging=()):
    """ Snapshot of the traffic with lanes and adjacency sets """
    if not radius > 0:
        raise ValueError(f"radius must be positive. radius = {radius}.")
    states = dict(states)
    lanes = {i: int(road.lane_index(s.y)) for i, s in states.items()}
    return TrafficSnapshot(time=time, states=states, lanes=lanes,
                           adjacency=_adjacency(states, lanes, radius),
                           merging=frozenset(merging) & frozenset(states))


def classify(snapshot, road, safety, ego_id):
    """ Verdict of the ego at the snapshot, None while the episode goes on """
    ego = snapshot.state(ego_id)
    merged = ego.y >= road.target_lane_center_y - MERGE_TOLERANCE
    if ego.x > road.ramp_end_x:
        return Verdict.RAMP_END_FAILURE
    if collision_flag(snapshot, ego_id, road, safety):
        return Verdict.COLLISION
    if merged:
        return Verdict.MERGED_SUCCESS
    return None


def _trace_rows(snapshot, dt, actions, ego_id=None, q=None):
    rows = []
    for i in snapshot.vehicle_ids:
        s = snapshot.state(i)
        action = actions.get(i)
        values = [q[a] for a in ACTIONS] if (i == ego_id and q) else [np.nan] * len(ACTIONS)
        rows.append([snapshot.time * dt, i, s.x, s.y, s.v_x,
                     "" if action is None else action.label] + values)
    return rows


def run(scenario):
    """ Closed loop run of a scenario.

    At each step: beliefs on the neighbors are updated with the last
    transition, the outcome is classified, the ego plans, the scripted
    vehicles choose their actions and every vehicle moves.

    Args:
        scenario (ScenarioConfig): vehicles, configuration and seed

    Returns
        SimOutcome with the verdict, the merge time in s (NaN unless merged),
        the state trace and the belief trace
    """
    m = scenario.model
    road, kinematics, sim = m.road, m.kinematics, m.simulation
    dt = kinematics.dt
    rng = np.random.default_rng(scenario.seed)
    ego_id = scenario.ego_id
    specs = {v.vehicle_id: v for v in scenario.vehicles}

    states = {i: spec.initial for i, spec in specs.items() if spec.initial is not None}
    merging = frozenset(
        i for i, spec in specs.items()
        if spec.merging or (spec.merging is None and spec.initial is not None
                            and int(road.lane_index(spec.initial.y)) == RAMP_LANE))
    beliefs = {i: init_belief() for i in specs if i != ego_id}
    log.info("scenario %s: %d vehicles, seed %d", scenario.name, len(specs), scenario.seed)

    rows, belief_rows = [], []
    previous, previous_values = None, {}
    verdict = None
    for t in range(sim.max_steps + 1):
        snapshot = make_snapshot(t, states, road, sim.adjacency_radius, merging)

        if previous is not None:
            for i in sorted(beliefs):
                if (i in previous.states and i in snapshot.states
                        and previous.neighbors(i)):
                    beliefs[i] = update(beliefs[i], previous, i, snapshot.state(i), road,
                                        kinematics, m.reward, m.behavior,
                                        values=previous_values.get(i))
        belief_rows.extend([t * dt, i] + list(beliefs[i].probabilities)
                           for i in sorted(beliefs) if i in snapshot.states)

        verdict = classify(snapshot, road, m.reward.safety, ego_id)
        if verdict is None and t == sim.max_steps:
            verdict = Verdict.TIMEOUT
        if verdict is not None:
            rows.extend(_trace_rows(snapshot, dt, {}))
            break

        result = plan(snapshot, beliefs, road, kinematics, m.planner, m.reward, m.behavior,
                      ego_id)
        actions = {ego_id: result.action}
        values = {}
        for i in snapshot.vehicle_ids:
            spec = specs[i]
            if spec.controller == "constant-speed":
                actions[i] = DriverAction.MAINTAIN
            elif spec.controller == "behavior":
                if snapshot.neighbors(i):
                    values[i] = InteractionValues(snapshot, i, road, kinematics, m.reward,
                                                  m.behavior)
                    actions[i] = values[i].choose_action(spec.sigma, spec.w, spec.mode, rng)
                else:
                    actions[i] = DriverAction.MAINTAIN

        following = {}
        for i in sorted(actions):
            if sim.disturbance:
                disturbance = rng.multivariate_normal(np.zeros(3), kinematics.Q)
            else:
                disturbance = np.zeros(3)
            following[i] = step(states[i], actions[i], kinematics, disturbance)
        for i, spec in specs.items():
            if spec.controller == "replay":
                recorded = spec.state_at(t + 1)
                if recorded is not None:
                    following[i] = recorded
                    if i in states:
                        actions[i] = reconstruct_action(states[i], recorded, kinematics)

        log.debug("t=%s actions %s", t, {i: a.label for i, a in actions.items()})
        rows.extend(_trace_rows(snapshot, dt, actions, ego_id, result.values))
        states = following
        previous, previous_values = snapshot, values

    merge_time = t * dt if verdict.success else np.nan
    log.info("scenario %s: %s after %d steps", scenario.name, verdict.value, t)
    trace = pd.DataFrame(rows, columns=TRACE_COLUMNS)
    belief_trace = pd.DataFrame(belief_rows, columns=["time", "vehicle_id"] + GRID.labels)
    return SimOutcome(verdict, merge_time, trace, belief_trace, t, scenario.name)
