#!/usr/bin/env python
# coding: utf-8

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .world import LANE_EPS, RoadGeometry

""" This module implements the reward model of the drivers: the four reward
variables (collision c, headway h, traveling time tau, control effort e),
the personal reward r = (1 - c) w.[h, tau, e] and the social value
orientation (SVO) reward that mixes the personal reward of a vehicle with
the rewards of its neighbors.

The feature functions work on numpy arrays and broadcast, so the same code
evaluates one pair of vehicles or every combination of predicted action
sequences of the pair at once. States are arrays whose last axis is
[x, v_x, y]. """

__author__ = "mergesim developers"


class SocialOrientation(Enum):
    """ SVO category of a driver """
    ALTRUISTIC = "altruistic"
    PROSOCIAL = "prosocial"
    EGOISTIC = "egoistic"
    COMPETITIVE = "competitive"

    @property
    def theta_self(self):
        return SVO_THETA[self][0]

    @property
    def theta_other(self):
        return SVO_THETA[self][1]

    @classmethod
    def from_label(cls, label):
        try:
            return cls(str(label).strip().lower())
        except ValueError:
            raise ValueError(f"unknown social orientation. sigma = {label}.")


# (theta_1, theta_2): weight of the own reward and of the neighbor's reward
SVO_THETA = {
    SocialOrientation.ALTRUISTIC: (0., 1.),
    SocialOrientation.PROSOCIAL: (.5, .5),
    SocialOrientation.EGOISTIC: (1., 0.),
    SocialOrientation.COMPETITIVE: (.5, -.5),
}


@dataclass(frozen=True)
class ObjectiveWeights:
    """ Weights of headway, traveling time and effort in the personal reward """
    w_h: float
    w_tau: float
    w_e: float

    def __post_init__(self):
        values = self.as_array()
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError(f"weights must be nonnegative. w = {values.tolist()}.")
        if abs(values.sum() - 1) > 1e-9:
            raise ValueError(f"weights must sum to 1. w = {values.tolist()}.")

    def as_array(self):
        return np.array([self.w_h, self.w_tau, self.w_e], dtype=float)

    @classmethod
    def normalized(cls, values):
        """ Build weights from any nonnegative triplet, e.g. [0, 1, 1] """
        values = np.asarray(values, dtype=float)
        if values.shape != (3,) or np.any(values < 0) or values.sum() <= 0:
            raise ValueError(f"weights need 3 nonnegative values. w = {values.tolist()}.")
        values = values / values.sum()
        return cls(*(float(v) for v in values))

    @classmethod
    def parse(cls, text):
        """ parse "0,2/3,1/3" """
        try:
            values = [float(Fraction(v.strip())) for v in str(text).split(",")]
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"cannot read weights. w = {text}.")
        return cls.normalized(values)

    @classmethod
    def uniform(cls):
        return cls(1 / 3, 1 / 3, 1 / 3)

    @property
    def label(self):
        return ",".join(f"{v:.4g}" for v in self.as_array())


# weights assumed for the neighbors during a driver's decision
W_OTHER = ObjectiveWeights.uniform()


@dataclass(frozen=True)
class SafetyConfig:
    """ Time-to-collision bounds and bounding boxes.

    Args:
        t_min (float): minimum reaction time, s
        t_max (float): adequate time headway, s
        lon_margin, lat_margin (float): safety margins of the box, m
        vehicle_length, vehicle_width (float): vehicle body, m
    """
    t_min: float = 0.2
    t_max: float = 3.
    lon_margin: float = 2.
    lat_margin: float = .5
    vehicle_length: float = 5.
    vehicle_width: float = 2.

    def __post_init__(self):
        if not 0 < self.t_min < self.t_max:
            raise ValueError(
                f"0 < t_min < t_max is required. ({self.t_min}, {self.t_max}).")
        if self.lon_margin < 0 or self.lat_margin < 0:
            raise ValueError(
                f"margins must be nonnegative. ({self.lon_margin}, {self.lat_margin}).")
        if not (self.vehicle_length > 0 and self.vehicle_width > 0):
            raise ValueError("vehicle dimensions must be positive.")


@dataclass(frozen=True)
class RewardConfig:
    """ Effort levels, mix of the two traveling time terms and safety
    parameters """
    e_speed: float = .5
    e_lane: float = .25
    ramp_mix: float = .5
    highway_mix: float = 0.
    safety: SafetyConfig = field(default_factory=SafetyConfig)

    def __post_init__(self):
        for name in ("e_speed", "e_lane"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ValueError(f"{name} must be in (0, 1). {name} = {value}.")
        for name in ("ramp_mix", "highway_mix"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValueError(f"{name} must be in [0, 1]. {name} = {value}.")

    @property
    def effort_levels(self):
        """ e of each action, in action order """
        return np.array([1., self.e_speed, self.e_speed, self.e_lane, self.e_lane])

    def mix(self, is_merging):
        return self.ramp_mix if is_merging else self.highway_mix


@dataclass(frozen=True)
class RewardFeatures:
    collision: bool
    headway: float
    progress: float
    effort: float

    def __post_init__(self):
        for name in ("headway", "progress", "effort"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValueError(f"{name} must be in [0, 1]. {name} = {value}.")

    def as_array(self):
        return np.array([self.headway, self.progress, self.effort], dtype=float)


def boxes_overlap(xi, yi, xj, yj, safety):
    """ Overlap of the margin-inflated box of i with the body of j """
    dx = np.abs(np.asarray(xj) - xi)
    dy = np.abs(np.asarray(yj) - yi)
    return ((dx < safety.vehicle_length + safety.lon_margin)
            & (dy < safety.vehicle_width + safety.lat_margin))


def off_road(x, y, road, safety):
    """ True when the body crosses a road boundary; beyond ramp_end_x the
    ramp lane is outside the road """
    half = safety.vehicle_width / 2
    y = np.asarray(y)
    return (y - half < road.lower_boundary(x)) | (y + half > road.upper_boundary)


def share_lane(yi, yj, lane_width):
    """ True when i and j sit at the same nearest lane center. A vehicle
    exactly halfway between two centers counts in both lanes. """
    ui = np.asarray(yi, dtype=float) / lane_width
    uj = np.asarray(yj, dtype=float) / lane_width
    low_i, high_i = np.ceil(ui - 1 - LANE_EPS), np.floor(ui + LANE_EPS)
    low_j, high_j = np.ceil(uj - 1 - LANE_EPS), np.floor(uj + LANE_EPS)
    return (low_i <= high_j) & (low_j <= high_i)


def time_to_collision(xi, yi, vi, xj, yj, vj, lane_width, safety):
    """ TTC of i behind leader j. j leads i when it is ahead and shares the
    nearest lane center of i. No leader or no closing speed gives +inf. """
    xi, yi, vi, xj, yj, vj = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (xi, yi, vi, xj, yj, vj)))
    leader = (xj > xi) & share_lane(yi, yj, lane_width)
    gap = np.maximum(xj - xi - safety.vehicle_length, 0.)
    closing = vi - vj
    return np.divide(gap, closing, out=np.full(gap.shape, np.inf),
                     where=leader & (closing > 0))


def headway_from_ttc(ttc, safety):
    ttc = np.clip(ttc, safety.t_min, safety.t_max)
    return (ttc - safety.t_min) / (safety.t_max - safety.t_min)


def progress_xy(x, y, road, mix):
    """ tau = (1 - mix) tau_x + mix tau_y """
    tau_x = np.clip((np.asarray(x) - road.ramp_start_x) / (road.goal_x - road.ramp_start_x), 0., 1.)
    offset = np.minimum(np.abs(np.asarray(y) - road.target_lane_center_y), road.lane_width)
    tau_y = 1 - offset / road.lane_width
    return (1 - mix) * tau_x + mix * tau_y


def progress(state, road, is_merging=False, mix=None, cfg=None):
    """ Traveling time reward of one vehicle.

    Args:
        state (VehicleState): the vehicle
        road (RoadGeometry): x_0, x_f, y_r and the lane width
        is_merging (bool): on-ramp vehicle, selects the mix when mix is None
        mix (float): weight of tau_y, in [0, 1]
        cfg (RewardConfig): provides the default mixes
    """
    if mix is None:
        mix = (cfg or RewardConfig()).mix(is_merging)
    if not 0 <= mix <= 1:
        raise ValueError(f"mix must be in [0, 1]. mix = {mix}.")
    return float(progress_xy(state.x, state.y, road, mix))


def effort(action, cfg=None):
    return float((cfg or RewardConfig()).effort_levels[int(action)])


def personal_reward(features, w):
    """ r = (1 - c) w.[h, tau, e] """
    if features.collision:
        return 0.
    return float(w.as_array() @ features.as_array())


def pair_features(si, ai, sj, aj, road, cfg, mix_i):
    """ Reward variables of vehicle i in its pairwise interaction with j.

    Args:
        si, sj (array): states [..., 3] as [x, v_x, y], broadcastable
        ai (array): action codes of i, broadcastable to si[..., 0]
        aj (array): action codes of j, only kept for the signature of the
            pairwise reward r_i(s_i, u_i, s_j, u_j)
        road (RoadGeometry): road
        cfg (RewardConfig): reward parameters
        mix_i (float): traveling time mix of i

    Returns
        c, h, tau, e arrays
    """
    si = np.asarray(si, dtype=float)
    sj = np.asarray(sj, dtype=float)
    xi, vi, yi = si[..., 0], si[..., 1], si[..., 2]
    xj, vj, yj = sj[..., 0], sj[..., 1], sj[..., 2]
    safety = cfg.safety

    c = boxes_overlap(xi, yi, xj, yj, safety) | off_road(xi, yi, road, safety)
    h = headway_from_ttc(
        time_to_collision(xi, yi, vi, xj, yj, vj, road.lane_width, safety), safety)
    tau = progress_xy(xi, yi, road, mix_i)
    e = cfg.effort_levels[np.asarray(ai, dtype=int)]
    return c, h, tau, e


def pair_reward(si, ai, sj, aj, w, road, cfg, mix_i):
    """ Scalar personal reward r_i(s_i, u_i, s_j, u_j | w) of two vehicles """
    c, h, tau, e = pair_features(si.as_vector(), int(ai), sj.as_vector(), int(aj),
                                 road, cfg, mix_i)
    features = RewardFeatures(bool(c), float(h), float(tau), float(e))
    return personal_reward(features, w)


def collision_flag(snapshot, vehicle_id, road, cfg=None):
    """ c of a vehicle against every other vehicle and the road boundaries """
    safety = cfg or SafetyConfig()
    state = snapshot.state(vehicle_id)
    if off_road(state.x, state.y, road, safety):
        return True
    for j, other in snapshot.states.items():
        if j != vehicle_id and boxes_overlap(state.x, state.y, other.x, other.y, safety):
            return True
    return False


def headway(snapshot, vehicle_id, cfg=None, road=None):
    """ h from the TTC with the nearest leader in the same lane """
    safety = cfg or SafetyConfig()
    lane_width = (road or RoadGeometry()).lane_width
    state = snapshot.state(vehicle_id)
    best_gap, ttc = np.inf, np.inf
    for j, other in snapshot.states.items():
        if j == vehicle_id:
            continue
        if other.x > state.x and share_lane(state.y, other.y, lane_width):
            gap = other.x - state.x
            if gap < best_gap:
                best_gap = gap
                ttc = time_to_collision(state.x, state.y, state.v_x,
                                        other.x, other.y, other.v_x, lane_width, safety)
    return float(headway_from_ttc(ttc, safety))


def svo_reward(snapshot, vehicle_id, controls, sigma, w_self, road, cfg=None):
    """ Multi-modal reward R_i of a vehicle at the current snapshot.

    Args:
        snapshot (TrafficSnapshot): traffic with the adjacency sets
        vehicle_id (int): vehicle i
        controls (dict): DriverAction of i and of every j in A(i)
        sigma (SocialOrientation): SVO of i
        w_self (ObjectiveWeights): weights of i
        road (RoadGeometry): road
        cfg (RewardConfig): reward parameters

    Returns
        R_i, the mean over j in A(i) of theta_1 r_i + theta_2 r_j
    """
    cfg = cfg or RewardConfig()
    neighbors = snapshot.neighbors(vehicle_id)
    if not neighbors:
        raise ValueError(f"vehicle {vehicle_id} has no adjacent vehicle.")
    si = snapshot.state(vehicle_id)
    mix_i = cfg.mix(vehicle_id in snapshot.merging)
    total = 0.
    for j in neighbors:
        sj = snapshot.state(j)
        r_i = pair_reward(si, controls[vehicle_id], sj, controls[j], w_self, road, cfg, mix_i)
        r_j = pair_reward(sj, controls[j], si, controls[vehicle_id], W_OTHER, road, cfg,
                          cfg.mix(j in snapshot.merging))
        total += sigma.theta_self * r_i + sigma.theta_other * r_j
    return total / len(neighbors)
