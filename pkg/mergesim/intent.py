#!/usr/bin/env python
# coding: utf-8

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from .behavior import InteractionValues
from .rewards import ObjectiveWeights, SocialOrientation
from .world import ACTIONS, ACCEL_SIGN, LATERAL_SIGN, DriverAction, TrafficSnapshot, step

""" This module implements the recursive Bayesian filter that estimates the
latent intent (sigma, w) of a neighbor from the observed traffic.

The support is a grid of 22 cells: the prosocial, egoistic and competitive
orientations combined with 7 weight vectors, plus a single altruistic cell
since an altruistic driver ignores its own weights. The likelihood of an
observed transition mixes the behavior policy with the Gaussian density of
the disturbance and is computed in log space. """

__author__ = "mergesim developers"

log = logging.getLogger(__name__)

# weight vectors of the grid, each a normalized combination of zeros and ones
WEIGHT_VECTORS = (
    ("001", (0, 0, 1)),
    ("011", (0, 1, 1)),
    ("010", (0, 1, 0)),
    ("111", (1, 1, 1)),
    ("101", (1, 0, 1)),
    ("110", (1, 1, 0)),
    ("100", (1, 0, 0)),
)
WEIGHT_SET = tuple(ObjectiveWeights.normalized(v) for _, v in WEIGHT_VECTORS)

UNDERFLOW = 1e-300


@dataclass(frozen=True)
class IntentCell:
    sigma: SocialOrientation
    w: ObjectiveWeights
    label: str


class IntentGrid:
    """ Cells in a fixed order: prosocial x W, egoistic x W, competitive x W
    and the altruistic cell last. """

    orientations = (SocialOrientation.PROSOCIAL, SocialOrientation.EGOISTIC,
                    SocialOrientation.COMPETITIVE)

    def __init__(self):
        cells = []
        for sigma in self.orientations:
            for (code, _), w in zip(WEIGHT_VECTORS, WEIGHT_SET):
                cells.append(IntentCell(sigma, w, f"{sigma.value}_{code}"))
        cells.append(IntentCell(SocialOrientation.ALTRUISTIC, ObjectiveWeights.uniform(),
                                SocialOrientation.ALTRUISTIC.value))
        self.cells = tuple(cells)

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)

    def __getitem__(self, index):
        return self.cells[index]

    @property
    def labels(self):
        return [cell.label for cell in self.cells]

    def index(self, sigma, w=None):
        """ position of (sigma, w); any w maps to the altruistic cell """
        if sigma is SocialOrientation.ALTRUISTIC:
            return len(self.cells) - 1
        for i, cell in enumerate(self.cells):
            if cell.sigma is sigma and np.allclose(cell.w.as_array(), w.as_array()):
                return i
        raise ValueError(f"({sigma.value}, {w.label}) is not a cell of the grid.")

    def index_of_label(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(f"unknown cell label. label = {label}.")


GRID = IntentGrid()


@dataclass(frozen=True)
class IntentBelief:
    """ Posterior over the cells of the grid """
    probabilities: tuple
    grid: IntentGrid = field(default=GRID, compare=False, repr=False)

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (len(self.grid),):
            raise ValueError(
                f"belief needs {len(self.grid)} probabilities. got {p.shape}.")
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
            raise ValueError(f"belief must be a distribution. sum = {p.sum()}.")
        object.__setattr__(self, "probabilities", tuple(p.tolist()))

    def as_array(self):
        return np.array(self.probabilities)

    def top(self, k=3):
        """ k most probable cells, ties kept in grid order """
        p = self.as_array()
        order = np.argsort(-p, kind="stable")[:k]
        return [(self.grid[i], float(p[i])) for i in order]

    def rank(self, sigma, w=None, rtol=0.):
        """ 1 for the most probable cell; cells tied with it share its rank.
        Probabilities within a relative rtol of the cell count as tied. """
        if rtol < 0:
            raise ValueError(f"rtol must be non-negative. rtol = {rtol}.")
        p = self.as_array()
        value = p[self.grid.index(sigma, w)]
        return int(np.sum(p > value * (1 + rtol))) + 1

    def entropy(self):
        p = self.as_array()
        p = p[p > 0]
        return float(-(p * np.log(p)).sum())


def init_belief(grid=GRID):
    return IntentBelief(tuple(np.full(len(grid), 1 / len(grid))), grid)


def log_disturbance_density(residuals, kinematics):
    return multivariate_normal(mean=np.zeros(3), cov=kinematics.Q).logpdf(residuals)


def log_transition_likelihoods(values, state, observed_next_state, kinematics, grid=GRID):
    """ log Lambda of every cell of the grid.

    Args:
        values (InteractionValues): tables of the observed vehicle at t
        state (VehicleState): its state at t
        observed_next_state (VehicleState): its observed state at t + 1
        kinematics (KinematicsConfig): f and the covariance Q

    Returns
        array of log Lambda, in grid order
    """
    observed = observed_next_state.as_vector()
    residuals = np.array([observed - step(state, u, kinematics).as_vector() for u in ACTIONS])
    log_phi = np.atleast_1d(log_disturbance_density(residuals, kinematics))
    return np.array([logsumexp(values.log_policy(cell.sigma, cell.w) + log_phi)
                     for cell in grid])


def transition_likelihood(snapshot, vehicle_id, observed_next_state, sigma, w, road,
                          kinematics, reward=None, behavior=None):
    """ Lambda = sum_u P(u | sigma, w, s) phi_Q(s' - f(s, u)) """
    values = InteractionValues(snapshot, vehicle_id, road, kinematics, reward, behavior)
    state = snapshot.state(vehicle_id)
    residuals = np.array([observed_next_state.as_vector() - step(state, u, kinematics).as_vector()
                          for u in ACTIONS])
    log_phi = np.atleast_1d(log_disturbance_density(residuals, kinematics))
    return float(np.exp(logsumexp(values.log_policy(sigma, w) + log_phi)))


def posterior(prior, log_likelihoods):
    """ Bayes step in log space. Returns the prior unchanged when every
    likelihood underflows. """
    prior = np.asarray(prior, dtype=float)
    log_likelihoods = np.asarray(log_likelihoods, dtype=float)
    if np.max(log_likelihoods) < np.log(UNDERFLOW):
        return prior.copy()
    with np.errstate(divide="ignore"):
        log_post = np.log(prior) + log_likelihoods
    log_post = log_post - logsumexp(log_post)
    p = np.exp(log_post)
    return p / p.sum()


def update(belief, snapshot, vehicle_id, observed_next_state, road, kinematics,
           reward=None, behavior=None, values=None):
    """ Posterior after observing the vehicle at t + 1.

    Args:
        belief (IntentBelief): prior at t
        snapshot (TrafficSnapshot): traffic at t
        vehicle_id (int): observed vehicle
        observed_next_state (VehicleState): its state at t + 1
        values (InteractionValues): tables of the vehicle at t, built when
            not given
    """
    if values is None:
        values = InteractionValues(snapshot, vehicle_id, road, kinematics, reward, behavior)
    log_lik = log_transition_likelihoods(values, snapshot.state(vehicle_id),
                                         observed_next_state, kinematics, belief.grid)
    if np.max(log_lik) < np.log(UNDERFLOW):
        log.debug("belief of vehicle %s kept at t=%s: every likelihood underflows",
                  vehicle_id, snapshot.time)
    return IntentBelief(tuple(posterior(belief.as_array(), log_lik)), belief.grid)


@dataclass(frozen=True)
class ObservationHistory:
    """ xi(t): snapshots s(0..t) and the controls applied between them, one
    {vehicle id: action} map per transition """
    snapshots: Sequence[TrafficSnapshot]
    controls: Sequence[Mapping[int, DriverAction]] = ()

    def __post_init__(self):
        times = [s.time for s in self.snapshots]
        if any(b - a != 1 for a, b in zip(times, times[1:])):
            raise ValueError(f"snapshots must be consecutive time steps. times = {times}.")
        if self.controls and len(self.controls) != max(len(self.snapshots) - 1, 0):
            raise ValueError("one control map is expected between two snapshots.")

    @classmethod
    def observe(cls, snapshots, kinematics):
        """ history with the controls reconstructed from the motion of every
        vehicle seen in two consecutive snapshots """
        controls = [{i: reconstruct_action(a.state(i), b.state(i), kinematics)
                     for i in a.states if i in b.states}
                    for a, b in zip(snapshots, snapshots[1:])]
        return cls(tuple(snapshots), tuple(controls))

    def control(self, t, vehicle_id):
        """ action of the vehicle between t and t + 1, None when unknown """
        if t >= len(self.controls):
            return None
        return self.controls[t].get(vehicle_id)


def run_filter(history, vehicle_id, road, kinematics, reward=None, behavior=None, grid=GRID):
    """ Beliefs on one vehicle along a history, the uniform prior first.
    Steps where the vehicle is missing or has no neighbor keep the belief. """
    beliefs = [init_belief(grid)]
    for current, following in zip(history.snapshots, history.snapshots[1:]):
        belief = beliefs[-1]
        if (vehicle_id in current.states and vehicle_id in following.states
                and current.neighbors(vehicle_id)):
            belief = update(belief, current, vehicle_id, following.state(vehicle_id),
                            road, kinematics, reward, behavior)
        beliefs.append(belief)
    return beliefs


def belief_frame(times, vehicle_id, beliefs, grid=GRID):
    """ belief trace table: time, vehicle_id, then one column per cell """
    rows = [[t, vehicle_id] + list(b.probabilities) for t, b in zip(times, beliefs)]
    return pd.DataFrame(rows, columns=["time", "vehicle_id"] + grid.labels)


def reconstruct_action(previous, following, kinematics):
    """ Nearest symbolic action to the finite-difference control between
    two observed states """
    a = (following.v_x - previous.v_x) / kinematics.dt
    v_y = (following.y - previous.y) / kinematics.dt
    cost = ((a - ACCEL_SIGN * kinematics.a_mag) / kinematics.a_mag) ** 2 \
        + ((v_y - LATERAL_SIGN * kinematics.lateral_speed) / kinematics.lateral_speed) ** 2
    return DriverAction(int(np.argmin(cost)))
