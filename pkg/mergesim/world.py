#!/usr/bin/env python
# coding: utf-8

import itertools
from dataclasses import dataclass, field
from enum import IntEnum
from typing import FrozenSet, Mapping

import numpy as np

""" This module implements the world model of the forced merging problem:
the road geometry, the state of one vehicle, the five symbolic driver
actions and the discrete-time kinematic update.

Lanes are counted from the outer boundary: lane 0 is the on-ramp and the
highway lanes are 1, 2, ... The lateral coordinate y increases leftward
from the outer boundary and x increases along the travel direction. """

__author__ = "mergesim developers"

RAMP_LANE = 0
EGO_ID = 0

# tolerance used when comparing lateral positions with lane centers
LANE_EPS = 1e-9


class DriverAction(IntEnum):
    """ The five maneuvers of the action space. The integer values give the
    fixed order used for enumeration and tie-breaking. """
    MAINTAIN = 0
    ACCELERATE = 1
    DECELERATE = 2
    STEER_LEFT = 3
    STEER_RIGHT = 4

    @property
    def label(self):
        return self.name.lower()

    @classmethod
    def from_label(cls, label):
        try:
            return cls[str(label).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown action. action = {label}.")


ACTIONS = tuple(DriverAction)

# sign of the longitudinal acceleration and of the lateral velocity, per action
ACCEL_SIGN = np.array([0., 1., -1., 0., 0.])
LATERAL_SIGN = np.array([0., 0., 0., 1., -1.])


@dataclass(frozen=True)
class RoadGeometry:
    """ Highway with an on-ramp on its outer side.

    Args:
        lane_count (int): number of highway lanes, the ramp is not counted
        lane_width (float): lane width in m
        ramp_start_x (float): x of the beginning of the ramp, m
        ramp_end_x (float): x of the end of the ramp, m
        goal_x (float): x of the goal placed beyond the ramp end, m
    """
    lane_count: int = 2
    lane_width: float = 3.5
    ramp_start_x: float = 0.
    ramp_end_x: float = 200.
    goal_x: float = 300.

    def __post_init__(self):
        if int(self.lane_count) != self.lane_count or self.lane_count < 1:
            raise ValueError(
                f"lane_count must be a positive integer. lane_count = {self.lane_count}.")
        if not self.lane_width > 0:
            raise ValueError(
                f"lane_width must be positive. lane_width = {self.lane_width}.")
        if not self.ramp_start_x < self.ramp_end_x <= self.goal_x:
            raise ValueError(
                "ramp_start_x < ramp_end_x <= goal_x is required. "
                f"({self.ramp_start_x}, {self.ramp_end_x}, {self.goal_x}).")

    @property
    def target_lane_center_y(self):
        """ y_r, center of the highway lane next to the ramp """
        return self.lane_center(RAMP_LANE + 1)

    @property
    def upper_boundary(self):
        return (self.lane_count + 1) * self.lane_width

    def lane_center(self, lane):
        return (lane + 0.5) * self.lane_width

    def lane_index(self, y):
        """ Index of the nearest lane center, ties go to the inner lane """
        k = np.floor(np.asarray(y) / self.lane_width + LANE_EPS)
        return np.clip(k, RAMP_LANE, self.lane_count).astype(int)

    def lower_boundary(self, x):
        """ The ramp lane exists up to ramp_end_x only """
        return np.where(np.asarray(x) <= self.ramp_end_x, 0., self.lane_width)

    def boundaries(self):
        """ Boundary polylines as lists of (x, y) points """
        w = self.lane_width
        outer = [(self.ramp_start_x, 0.), (self.ramp_end_x, 0.),
                 (self.ramp_end_x, w), (self.goal_x, w)]
        inner = [(self.ramp_start_x, self.upper_boundary),
                 (self.goal_x, self.upper_boundary)]
        return outer, inner


@dataclass(frozen=True)
class VehicleState:
    """ s_i = [x, y, v_x] of one vehicle """
    x: float
    y: float
    v_x: float

    def as_vector(self):
        """ state ordered as [x, v_x, y], the order of the kinematic update """
        return np.array([self.x, self.v_x, self.y], dtype=float)

    @classmethod
    def from_vector(cls, vector):
        x, v_x, y = (float(v) for v in vector)
        return cls(x=x, y=y, v_x=v_x)


@dataclass(frozen=True)
class KinematicsConfig:
    """ Parameters of the discrete-time kinematics.

    Args:
        dt (float): sampling period, s
        a_mag (float): magnitude of the acceleration of the speed actions, m/s2
        t_lane (float): duration of a complete lane change, s
        lane_width (float): lateral travel of a lane change, m
        v_min, v_max (float): speed limits, m/s
        disturbance_cov (tuple): 3x3 covariance Q of the disturbance on
            [x, v_x, y]
    """
    dt: float = 1.
    a_mag: float = 6.
    t_lane: float = 2.
    lane_width: float = 3.5
    v_min: float = 0.
    v_max: float = 40.
    disturbance_cov: tuple = ((0.25, 0., 0.), (0., 0.25, 0.), (0., 0., 0.04))

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive. dt = {self.dt}.")
        if not self.a_mag > 0:
            raise ValueError(f"a_mag must be positive. a_mag = {self.a_mag}.")
        if not self.t_lane > 0:
            raise ValueError(f"t_lane must be positive. t_lane = {self.t_lane}.")
        if not self.lane_width > 0:
            raise ValueError(
                f"lane_width must be positive. lane_width = {self.lane_width}.")
        if not 0 <= self.v_min < self.v_max:
            raise ValueError(
                f"0 <= v_min < v_max is required. ({self.v_min}, {self.v_max}).")
        cov = np.asarray(self.disturbance_cov, dtype=float)
        if cov.shape != (3, 3) or not np.allclose(cov, cov.T):
            raise ValueError(
                f"disturbance_cov must be a symmetric 3x3 matrix. Q = {cov.tolist()}.")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError(
                f"disturbance_cov must be positive-definite. Q = {cov.tolist()}.")
        object.__setattr__(
            self, "disturbance_cov", tuple(tuple(float(v) for v in row) for row in cov))

    @classmethod
    def replay(cls, **kwargs):
        """ Decision epochs of 2 s and lane changes of 4 s, used against
        recorded traffic """
        params = dict(dt=2., t_lane=4.)
        params.update(kwargs)
        return cls(**params)

    @property
    def Q(self):
        return np.array(self.disturbance_cov)

    @property
    def lateral_speed(self):
        return self.lane_width / self.t_lane

    def control(self, action):
        """ control u = [a, v_y] induced by an action """
        action = DriverAction(action)
        return (ACCEL_SIGN[action] * self.a_mag, LATERAL_SIGN[action] * self.lateral_speed)


def _advance(x, v_x, y, action, cfg, disturbance=None):
    """ Vectorized kinematic update. action holds DriverAction codes and
    broadcasts against the state arrays. """
    action = np.asarray(action, dtype=int)
    accel = ACCEL_SIGN[action] * cfg.a_mag
    lateral = LATERAL_SIGN[action]

    new_x = x + v_x * cfg.dt
    new_v = v_x + accel * cfg.dt
    new_y = y + lateral * cfg.lateral_speed * cfg.dt
    if disturbance is not None:
        new_x = new_x + disturbance[..., 0]
        new_v = new_v + disturbance[..., 1]
        new_y = new_y + disturbance[..., 2]

    new_v = np.clip(new_v, cfg.v_min, cfg.v_max)

    # snap onto the center of the lane the steer is heading to
    w = cfg.lane_width
    u = np.asarray(y) / w - 0.5
    target = np.where(lateral > 0,
                      np.floor(u + LANE_EPS) + 1,
                      np.ceil(u - LANE_EPS) - 1)
    center = (target + 0.5) * w
    travel = cfg.lateral_speed * cfg.dt
    remaining = (center - new_y) * lateral
    snap = (lateral != 0) & (remaining < travel - LANE_EPS)
    new_y = np.where(snap, center, new_y)

    return new_x, new_v, new_y


def step(state, action, cfg, disturbance=(0., 0., 0.)):
    """ One step of the kinematics, s(t+1) = f(s(t), u(t)) + disturbance.

    Args:
        state (VehicleState): current state
        action (DriverAction): applied maneuver
        cfg (KinematicsConfig): kinematic parameters
        disturbance (3-vector): additive disturbance on [x, v_x, y]

    Returns
        the next VehicleState, speed clamped to [v_min, v_max]
    """
    disturbance = np.asarray(disturbance, dtype=float)
    if disturbance.shape != (3,) or not np.all(np.isfinite(disturbance)):
        raise ValueError(f"disturbance must be a finite 3-vector. {disturbance}.")
    x, v_x, y = _advance(state.x, state.v_x, state.y, int(action), cfg, disturbance)
    return VehicleState(x=float(x), y=float(y), v_x=float(v_x))


def predict(state, sequences, cfg):
    """ Disturbance-free rollouts of many action sequences.

    Args:
        state (VehicleState): initial state
        sequences (array): action codes, shape (M, N)
        cfg (KinematicsConfig): kinematic parameters

    Returns
        array of shape (M, N, 3) holding [x, v_x, y] at t, ..., t+N-1
    """
    sequences = np.atleast_2d(np.asarray(sequences, dtype=int))
    m, n = sequences.shape
    out = np.empty((m, n, 3))
    x = np.full(m, state.x, dtype=float)
    v_x = np.full(m, state.v_x, dtype=float)
    y = np.full(m, state.y, dtype=float)
    for k in range(n):
        out[:, k] = np.stack([x, v_x, y], axis=-1)
        x, v_x, y = _advance(x, v_x, y, sequences[:, k], cfg)
    return out


def rollout(state, actions, cfg):
    """ Apply a sequence of actions with zero disturbance and return the N
    successive states """
    if len(actions) < 1:
        raise ValueError("rollout needs at least one action.")
    states = []
    for action in actions:
        state = step(state, action, cfg)
        states.append(state)
    return states


def enumerate_sequences(horizon):
    """ All 5**horizon action sequences as an int array, first action major
    so that the sequences starting with one action form a contiguous block """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1. horizon = {horizon}.")
    return np.array(list(itertools.product(range(len(ACTIONS)), repeat=horizon)),
                    dtype=int)


def feasible_actions(state, road):
    """ Actions whose target lane exists. Maintain and the speed actions are
    always available. The ramp lane is a target only up to its end. """
    u = state.y / road.lane_width - 0.5
    left_target = np.floor(u + LANE_EPS) + 1
    right_target = np.ceil(u - LANE_EPS) - 1

    feasible = {DriverAction.MAINTAIN, DriverAction.ACCELERATE, DriverAction.DECELERATE}
    if left_target <= road.lane_count:
        feasible.add(DriverAction.STEER_LEFT)
    onto_ramp = right_target == RAMP_LANE and state.x <= road.ramp_end_x
    if right_target >= RAMP_LANE + 1 or onto_ramp:
        feasible.add(DriverAction.STEER_RIGHT)
    return frozenset(feasible)


def feasible_mask(state, road):
    """ feasible_actions as a boolean array in action order """
    feasible = feasible_actions(state, road)
    return np.array([a in feasible for a in ACTIONS])


@dataclass(frozen=True)
class TrafficSnapshot:
    """ States of all vehicles at one time index with their lane assignment
    and adjacency sets A(i). Built by simulation.make_snapshot. """
    time: int
    states: Mapping[int, VehicleState]
    lanes: Mapping[int, int]
    adjacency: Mapping[int, FrozenSet[int]]
    merging: FrozenSet[int] = field(default_factory=frozenset)

    def __post_init__(self):
        for i, neighbors in self.adjacency.items():
            if i in neighbors:
                raise ValueError(f"vehicle {i} cannot be adjacent to itself.")
            for j in neighbors:
                if i not in self.adjacency.get(j, ()):
                    raise ValueError(f"adjacency must be symmetric. ({i}, {j}).")

    def state(self, vehicle_id):
        try:
            return self.states[vehicle_id]
        except KeyError:
            raise KeyError(f"unknown vehicle id {vehicle_id}.")

    def neighbors(self, vehicle_id):
        self.state(vehicle_id)
        return sorted(self.adjacency.get(vehicle_id, ()))

    @property
    def vehicle_ids(self):
        return sorted(self.states)
