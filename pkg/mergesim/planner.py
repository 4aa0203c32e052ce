#!/usr/bin/env python
# coding: utf-8

import logging
import time
from dataclasses import dataclass, replace
from typing import Dict, Mapping

import numpy as np

from .behavior import ActionSequence, BehaviorConfig, InteractionValues
from .intent import IntentBelief, init_belief
from .rewards import RewardConfig, boxes_overlap, off_road, progress_xy
from .world import ACTIONS, EGO_ID, DriverAction, enumerate_sequences, feasible_mask, predict

""" This module implements the receding-horizon merging controller of the
ego vehicle. Each ego sequence is scored pairwise against every adjacent
vehicle: the discounted ego reward (1 - c) tau is averaged over the
neighbor's sequences, weighted by the behavior model sequence policy of
each intent cell and by the current belief on the cells. The work grows
linearly with the number of adjacent vehicles. """

__author__ = "mergesim developers"

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlannerConfig:
    """ Ego controller parameters.

    Args:
        horizon (int): N
        discount (float): lambda
        congestion (bool): add the neighbor's traveling time to the ego reward
        congestion_weight (float): weight of the neighbor's traveling time
        compute_budget (float): seconds, a plan step over budget is logged
    """
    horizon: int = 3
    discount: float = .9
    congestion: bool = False
    congestion_weight: float = .5
    compute_budget: float = 1.

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer. horizon = {self.horizon}.")
        if not 0 <= self.discount <= 1:
            raise ValueError(f"discount must be in [0, 1]. discount = {self.discount}.")
        if not 0 <= self.congestion_weight <= 1:
            raise ValueError(
                f"congestion_weight must be in [0, 1]. congestion_weight = {self.congestion_weight}.")

    @property
    def discounts(self):
        return np.power(float(self.discount), np.arange(self.horizon))


@dataclass(frozen=True)
class PlanResult:
    action: DriverAction
    values: Dict[DriverAction, float]
    beliefs: Mapping[int, IntentBelief]
    elapsed: float


def _ego_reward(ego_paths, other_paths, road, reward, planner, mix_ego, mix_other):
    """ r_0 = (1 - c) tau along broadcast paths """
    x0, y0 = ego_paths[..., 0], ego_paths[..., 2]
    xi, yi = other_paths[..., 0], other_paths[..., 2]
    c = boxes_overlap(x0, y0, xi, yi, reward.safety) | off_road(x0, y0, road, reward.safety)
    tau = progress_xy(x0, y0, road, mix_ego)
    if planner.congestion:
        kappa = planner.congestion_weight
        tau = (1 - kappa) * tau + kappa * progress_xy(xi, yi, road, mix_other)
    return (1. - c) * tau


def pair_value_matrix(snapshot, neighbor_id, road, kinematics, planner=None, reward=None,
                      ego_id=EGO_ID):
    """ Q-bar'_0 for every (ego sequence, neighbor sequence) pair, shape (M, M) """
    planner = planner or PlannerConfig()
    reward = reward or RewardConfig()
    sequences = enumerate_sequences(planner.horizon)
    ego_paths = predict(snapshot.state(ego_id), sequences, kinematics)[:, None]
    other_paths = predict(snapshot.state(neighbor_id), sequences, kinematics)[None, :]
    r = _ego_reward(ego_paths, other_paths, road, reward, planner,
                    reward.mix(ego_id in snapshot.merging),
                    reward.mix(neighbor_id in snapshot.merging))
    return np.einsum("ijk,k->ij", r, planner.discounts)


def solo_values(snapshot, road, kinematics, planner=None, reward=None, ego_id=EGO_ID):
    """ Ego value of every sequence with no neighbor, only the road
    boundaries can end the reward """
    planner = planner or PlannerConfig()
    reward = reward or RewardConfig()
    sequences = enumerate_sequences(planner.horizon)
    paths = predict(snapshot.state(ego_id), sequences, kinematics)
    x0, y0 = paths[..., 0], paths[..., 2]
    keep = 1. - off_road(x0, y0, road, reward.safety)
    r = keep * progress_xy(x0, y0, road, reward.mix(ego_id in snapshot.merging))
    return r @ planner.discounts


def neighbor_sequence_distribution(snapshot, neighbor_id, belief, road, kinematics,
                                   reward=None, behavior=None):
    """ sum over cells of belief(cell) P(gamma_i | cell, s) """
    values = InteractionValues(snapshot, neighbor_id, road, kinematics, reward, behavior)
    p = belief.as_array()
    distribution = np.zeros(len(values.sequences))
    for cell, weight in zip(belief.grid, p):
        if weight > 0:
            distribution += weight * values.sequence_policy(cell.sigma, cell.w)
    return distribution


def _behavior_for(planner, behavior):
    # neighbor sequences are enumerated over the planner horizon
    return replace(behavior or BehaviorConfig(), horizon=planner.horizon)


def ego_sequence_values(snapshot, beliefs, road, kinematics, planner=None, reward=None,
                        behavior=None, ego_id=EGO_ID):
    """ Q'_0 of every ego sequence """
    planner = planner or PlannerConfig()
    neighbors = snapshot.neighbors(ego_id)
    if not neighbors:
        raise ValueError(f"ego vehicle {ego_id} has no adjacent vehicle.")
    behavior = _behavior_for(planner, behavior)
    total = 0.
    for i in neighbors:
        belief = beliefs.get(i) or init_belief()
        matrix = pair_value_matrix(snapshot, i, road, kinematics, planner, reward, ego_id)
        distribution = neighbor_sequence_distribution(snapshot, i, belief, road, kinematics,
                                                      reward, behavior)
        total = total + matrix @ distribution
    return total / len(neighbors)


def ego_pair_value(snapshot, neighbor_id, gamma0, gamma_i, road, kinematics, planner=None,
                   reward=None, ego_id=EGO_ID):
    """ Q-bar'_0 of one pair of sequences """
    matrix = pair_value_matrix(snapshot, neighbor_id, road, kinematics, planner, reward, ego_id)
    return float(matrix[ActionSequence(tuple(gamma0)).index, ActionSequence(tuple(gamma_i)).index])


def ego_cumulative(snapshot, gamma0, beliefs, road, kinematics, planner=None, reward=None,
                   behavior=None, ego_id=EGO_ID):
    """ Q'_0(s, gamma_0) """
    values = ego_sequence_values(snapshot, beliefs, road, kinematics, planner, reward,
                                 behavior, ego_id)
    return float(values[ActionSequence(tuple(gamma0)).index])


def plan(snapshot, beliefs, road, kinematics, planner=None, reward=None, behavior=None,
         ego_id=EGO_ID):
    """ Receding-horizon choice of the ego action.

    Args:
        snapshot (TrafficSnapshot): current traffic
        beliefs (dict): IntentBelief of the adjacent vehicles, missing ones
            are taken uniform
        road, kinematics: road geometry and kinematics
        planner, reward, behavior: configurations

    Returns
        PlanResult with the argmax over the feasible actions, ties resolved
        in the fixed action order
    """
    planner = planner or PlannerConfig()
    start = time.perf_counter()
    neighbors = snapshot.neighbors(ego_id)
    if neighbors:
        values = ego_sequence_values(snapshot, beliefs, road, kinematics, planner, reward,
                                     behavior, ego_id)
    else:
        values = solo_values(snapshot, road, kinematics, planner, reward, ego_id)
    q = values.reshape(len(ACTIONS), -1).mean(axis=1)
    feasible = feasible_mask(snapshot.state(ego_id), road)
    action = DriverAction(int(np.argmax(np.where(feasible, q, -np.inf))))
    elapsed = time.perf_counter() - start

    log.debug("t=%s ego %s, Q0=%s", snapshot.time, action.label, np.round(q, 4).tolist())
    if elapsed > planner.compute_budget:
        log.warning("plan step at t=%s took %.3f s, over the %.3f s budget",
                    snapshot.time, elapsed, planner.compute_budget)
    used = {i: beliefs.get(i) or init_belief() for i in neighbors}
    return PlanResult(action, dict(zip(ACTIONS, q.tolist())), used, elapsed)
