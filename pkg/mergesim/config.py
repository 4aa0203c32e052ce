#!/usr/bin/env python
# coding: utf-8

import json
import logging
import os
from dataclasses import dataclass, field, fields, replace

from .behavior import BehaviorConfig
from .planner import PlannerConfig
from .rewards import RewardConfig, SafetyConfig
from .world import KinematicsConfig, RoadGeometry

""" This module implements the configuration surface. Every tunable lives
in a frozen dataclass with its default value; a JSON document overrides
them section by section:

    {"road": {...}, "kinematics": {...}, "safety": {...}, "reward": {...},
     "behavior": {...}, "planner": {...}, "simulation": {...}}

Scenario files embed the same sections next to their vehicles. """

__author__ = "mergesim developers"

log = logging.getLogger(__name__)

SECTIONS = ("road", "kinematics", "safety", "reward", "behavior", "planner", "simulation")

THREADS_VARIABLE = "MERGESIM_THREADS"


class ScenarioError(ValueError):
    """ Malformed scenario or configuration file """


@dataclass(frozen=True)
class SimulationSettings:
    """ Closed loop settings.

    Args:
        adjacency_radius (float): longitudinal reach of A(i), m
        disturbance (bool): draw the Gaussian disturbance at each step
        max_steps (int): steps before the Timeout verdict
    """
    adjacency_radius: float = 100.
    disturbance: bool = False
    max_steps: int = 20

    def __post_init__(self):
        if not self.adjacency_radius > 0:
            raise ValueError(
                f"adjacency_radius must be positive. adjacency_radius = {self.adjacency_radius}.")
        if not isinstance(self.disturbance, bool):
            raise ValueError(f"disturbance must be a boolean. disturbance = {self.disturbance}.")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ValueError(f"max_steps must be a positive integer. max_steps = {self.max_steps}.")


@dataclass(frozen=True)
class ModelConfig:
    road: RoadGeometry = field(default_factory=RoadGeometry)
    kinematics: KinematicsConfig = field(default_factory=KinematicsConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    behavior: BehaviorConfig = field(default_factory=BehaviorConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)

    @classmethod
    def replay(cls):
        """ defaults of the evaluation against recorded traffic """
        return cls(kinematics=KinematicsConfig.replay())


def _build(base, values, section, exclude=()):
    if not isinstance(values, dict):
        raise ScenarioError(f"section '{section}' must be a JSON object.")
    known = {f.name for f in fields(base)} - set(exclude)
    unknown = sorted(set(values) - known)
    if unknown:
        raise ScenarioError(f"unknown keys in section '{section}': {', '.join(unknown)}.")
    try:
        return replace(base, **values)
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"section '{section}': {e}")


def config_from_dict(data, base=None):
    """ Apply the sections found in data over base, other keys are ignored """
    base = base or ModelConfig()
    road = _build(base.road, data.get("road", {}), "road")

    kinematics = data.get("kinematics", {})
    if isinstance(kinematics, dict) and "lane_width" not in kinematics:
        kinematics = {**kinematics, "lane_width": road.lane_width}
    kinematics = _build(base.kinematics, kinematics, "kinematics")
    if kinematics.lane_width != road.lane_width:
        raise ScenarioError(
            f"kinematics and road lane widths differ. ({kinematics.lane_width}, {road.lane_width}).")

    safety = _build(base.reward.safety, data.get("safety", {}), "safety")
    reward = _build(base.reward, data.get("reward", {}), "reward", exclude=("safety",))
    reward = replace(reward, safety=safety)

    return ModelConfig(
        road=road,
        kinematics=kinematics,
        reward=reward,
        behavior=_build(base.behavior, data.get("behavior", {}), "behavior"),
        planner=_build(base.planner, data.get("planner", {}), "planner"),
        simulation=_build(base.simulation, data.get("simulation", {}), "simulation"),
    )


def read_json(path):
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ScenarioError(f"{path} must hold a JSON object.")
    return data


def load_config(path, base=None):
    """ Read a configuration file made of sections only """
    data = read_json(path)
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ScenarioError(f"unknown sections in {path}: {', '.join(unknown)}.")
    config = config_from_dict(data, base)
    log.debug("configuration read from %s", path)
    return config


def worker_count(default=None):
    """ Size of the episode worker pool, capped by MERGESIM_THREADS """
    count = default or os.cpu_count() or 1
    value = os.environ.get(THREADS_VARIABLE)
    if value:
        try:
            cap = int(value)
        except ValueError:
            raise ValueError(f"{THREADS_VARIABLE} must be an integer. {THREADS_VARIABLE} = {value}.")
        if cap < 1:
            raise ValueError(f"{THREADS_VARIABLE} must be positive. {THREADS_VARIABLE} = {value}.")
        count = min(count, cap)
    return max(count, 1)
