#!/usr/bin/env python
# coding: utf-8

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax, softmax

from .rewards import W_OTHER, RewardConfig, pair_features, pair_reward
from .world import (ACTIONS, DriverAction, enumerate_sequences, feasible_mask,
                    predict, rollout)

""" This module implements the driver behavior model. A driver with
social orientation sigma and weights w scores each of its action sequences
by the discounted SVO reward, averaged over every action sequence its
neighbors may take, and acts in receding horizon with a softmax rule.

Since the SVO reward is a mean of pairwise terms and the neighbor
sequences are independent and uniform, the expectation over the joint
neighbor sequences is the mean over neighbors of pairwise expectations.
InteractionValues stores these pairwise expectations once per snapshot;
they are linear in w, so every (sigma, w) reuses the same tables. """

__author__ = "mergesim developers"


@dataclass(frozen=True)
class BehaviorConfig:
    """ horizon N, discount lambda and softmax temperature """
    horizon: int = 3
    discount: float = .9
    temperature: float = 1.

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer. horizon = {self.horizon}.")
        if not 0 <= self.discount <= 1:
            raise ValueError(f"discount must be in [0, 1]. discount = {self.discount}.")
        if not self.temperature > 0:
            raise ValueError(
                f"temperature must be positive. temperature = {self.temperature}.")

    @property
    def discounts(self):
        return np.power(float(self.discount), np.arange(self.horizon))


@dataclass(frozen=True)
class ActionSequence:
    """ gamma, a sequence of N actions """
    actions: tuple

    def __post_init__(self):
        actions = tuple(DriverAction(a) for a in self.actions)
        if not actions:
            raise ValueError("an action sequence cannot be empty.")
        object.__setattr__(self, "actions", actions)

    def __len__(self):
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    @property
    def index(self):
        """ row of the sequence in enumerate_sequences(N) """
        index = 0
        for action in self.actions:
            index = index * len(ACTIONS) + int(action)
        return index

    @classmethod
    def from_index(cls, index, horizon):
        actions = []
        for _ in range(horizon):
            index, code = divmod(index, len(ACTIONS))
            actions.append(code)
        return cls(tuple(reversed(actions)))


def pair_tables(own_paths, other_paths, sequences, discounts, road, reward, mix_own, mix_other):
    """ Pairwise expectations between a vehicle and one neighbor.

    Args:
        own_paths, other_paths (array): predicted states, shape (M, N, 3)
        sequences (array): action codes, shape (M, N)
        discounts (array): lambda**k, shape (N,)
        road, reward: road geometry and reward parameters
        mix_own, mix_other (float): traveling time mix of the two vehicles

    Returns
        own (M, 3): for each own sequence, the discounted sum of
            (1 - c) [h, tau, e] averaged over the neighbor sequences
        other (M,): same for the neighbor's reward under W_OTHER
    """
    s_own = own_paths[:, None]
    s_other = other_paths[None, :]
    a_own = sequences[:, None]
    a_other = sequences[None, :]

    c, h, tau, e = pair_features(s_own, a_own, s_other, a_other, road, reward, mix_own)
    keep = 1. - c
    features = np.stack(np.broadcast_arrays(keep * h, keep * tau, keep * e), axis=-1)
    own = np.einsum("ijkf,k->if", features, discounts) / features.shape[1]

    c, h, tau, e = pair_features(s_other, a_other, s_own, a_own, road, reward, mix_other)
    weights = W_OTHER.as_array()
    r_other = (1. - c) * (weights[0] * h + weights[1] * tau + weights[2] * e)
    r_other = np.broadcast_to(r_other, c.shape)
    other = np.einsum("ijk,k->i", r_other, discounts) / r_other.shape[1]
    return own, other


class InteractionValues:
    """ Value tables of one vehicle at one snapshot. The cumulative reward
    of every sequence, the action values, the policy and the sequence
    policy follow for any (sigma, w) by a matrix product. """

    def __init__(self, snapshot, vehicle_id, road, kinematics, reward=None, behavior=None):
        self.reward = reward or RewardConfig()
        self.behavior = behavior or BehaviorConfig()
        self.vehicle_id = vehicle_id
        self.neighbors = snapshot.neighbors(vehicle_id)
        if not self.neighbors:
            raise ValueError(f"vehicle {vehicle_id} has no adjacent vehicle.")

        state = snapshot.state(vehicle_id)
        self.sequences = enumerate_sequences(self.behavior.horizon)
        self.feasible = feasible_mask(state, road)
        discounts = self.behavior.discounts
        own_paths = predict(state, self.sequences, kinematics)
        mix_own = self.reward.mix(vehicle_id in snapshot.merging)

        own = np.zeros((len(self.sequences), 3))
        other = np.zeros(len(self.sequences))
        for j in self.neighbors:
            other_paths = predict(snapshot.state(j), self.sequences, kinematics)
            pair_own, pair_other = pair_tables(
                own_paths, other_paths, self.sequences, discounts, road, self.reward,
                mix_own, self.reward.mix(j in snapshot.merging))
            own += pair_own
            other += pair_other
        self.own = own / len(self.neighbors)
        self.other = other / len(self.neighbors)

    def sequence_values(self, sigma, w):
        """ Q'_i of every sequence, in enumerate_sequences order """
        return sigma.theta_self * (self.own @ w.as_array()) + sigma.theta_other * self.other

    def action_values(self, sigma, w):
        """ Q_i(s, u): mean of Q'_i over the sequences starting with u """
        values = self.sequence_values(sigma, w)
        return values.reshape(len(ACTIONS), -1).mean(axis=1)

    def _action_logits(self, sigma, w):
        q = self.action_values(sigma, w) / self.behavior.temperature
        return np.where(self.feasible, q, -np.inf)

    def policy(self, sigma, w):
        return softmax(self._action_logits(sigma, w))

    def log_policy(self, sigma, w):
        return log_softmax(self._action_logits(sigma, w))

    def sequence_policy(self, sigma, w):
        """ P(gamma) proportional to exp(Q'_i(gamma)), sequences whose first
        action is infeasible get no mass """
        logits = self.sequence_values(sigma, w) / self.behavior.temperature
        logits = np.where(self.feasible[self.sequences[:, 0]], logits, -np.inf)
        return softmax(logits)

    def best_action(self, sigma, w):
        """ argmax of the action values over the feasible actions; ties go
        to the first action in the fixed action order """
        q = np.where(self.feasible, self.action_values(sigma, w), -np.inf)
        return DriverAction(int(np.argmax(q)))

    def choose_action(self, sigma, w, mode="argmax", rng=None):
        if mode == "argmax":
            return self.best_action(sigma, w)
        if mode == "sample":
            rng = rng if rng is not None else np.random.default_rng()
            return DriverAction(int(rng.choice(len(ACTIONS), p=self.policy(sigma, w))))
        raise ValueError(f"mode must be 'argmax' or 'sample'. mode = {mode}.")


def _as_sequence(gamma, horizon):
    if not isinstance(gamma, ActionSequence):
        gamma = ActionSequence(tuple(gamma))
    if len(gamma) != horizon:
        raise ValueError(f"sequence length must be {horizon}. length = {len(gamma)}.")
    return gamma


def cumulative_reward(snapshot, vehicle_id, gamma, sigma, w, road, kinematics,
                      reward=None, behavior=None):
    """ Q'_i(s, gamma | sigma, w) of one action sequence """
    values = InteractionValues(snapshot, vehicle_id, road, kinematics, reward, behavior)
    gamma = _as_sequence(gamma, values.behavior.horizon)
    return float(values.sequence_values(sigma, w)[gamma.index])


def action_values(snapshot, vehicle_id, sigma, w, road, kinematics, reward=None, behavior=None):
    values = InteractionValues(snapshot, vehicle_id, road, kinematics, reward, behavior)
    return dict(zip(ACTIONS, values.action_values(sigma, w).tolist()))


def policy(snapshot, vehicle_id, sigma, w, road, kinematics, reward=None, behavior=None):
    """ softmax distribution over the actions, zero on infeasible ones """
    values = InteractionValues(snapshot, vehicle_id, road, kinematics, reward, behavior)
    return dict(zip(ACTIONS, values.policy(sigma, w).tolist()))


def sequence_policy(snapshot, vehicle_id, sigma, w, road, kinematics, reward=None,
                    behavior=None):
    values = InteractionValues(snapshot, vehicle_id, road, kinematics, reward, behavior)
    probabilities = values.sequence_policy(sigma, w)
    horizon = values.behavior.horizon
    return {ActionSequence.from_index(m, horizon): float(p)
            for m, p in enumerate(probabilities)}


def joint_cumulative_reward(snapshot, vehicle_id, gamma, sigma, w, road, kinematics,
                            reward=None, behavior=None):
    """ Q'_i by enumeration of every joint combination of neighbor
    sequences, with scalar rollouts and scalar rewards. Exponential in the
    number of neighbors, kept as a reference for InteractionValues. """
    reward = reward or RewardConfig()
    behavior = behavior or BehaviorConfig()
    gamma = _as_sequence(gamma, behavior.horizon)
    neighbors = snapshot.neighbors(vehicle_id)
    if not neighbors:
        raise ValueError(f"vehicle {vehicle_id} has no adjacent vehicle.")

    def path(state, actions):
        return [state] + rollout(state, actions[:-1], kinematics) if len(actions) > 1 else [state]

    sequences = [ActionSequence(s) for s in itertools.product(ACTIONS, repeat=behavior.horizon)]
    own_path = path(snapshot.state(vehicle_id), gamma.actions)
    mix_own = reward.mix(vehicle_id in snapshot.merging)
    paths = {j: [path(snapshot.state(j), s.actions) for s in sequences] for j in neighbors}

    terms = {}

    def term(j, m, k):
        # theta_1 r_i + theta_2 r_j of the pair (i, j) at step k
        key = (j, m, k)
        if key not in terms:
            si, ui = own_path[k], gamma.actions[k]
            sj, uj = paths[j][m][k], sequences[m].actions[k]
            r_i = pair_reward(si, ui, sj, uj, w, road, reward, mix_own)
            r_j = pair_reward(sj, uj, si, ui, W_OTHER, road, reward,
                              reward.mix(j in snapshot.merging))
            terms[key] = sigma.theta_self * r_i + sigma.theta_other * r_j
        return terms[key]

    total = 0.
    combos = itertools.product(range(len(sequences)), repeat=len(neighbors))
    count = 0
    for combo in combos:
        value = 0.
        for k in range(behavior.horizon):
            r = sum(term(j, m, k) for j, m in zip(neighbors, combo)) / len(neighbors)
            value += behavior.discount ** k * r
        total += value
        count += 1
    return total / count
