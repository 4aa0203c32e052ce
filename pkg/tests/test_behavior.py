# coding: utf-8

import numpy as np
import pytest

from mergesim.behavior import (ActionSequence, BehaviorConfig, InteractionValues,
                               action_values, cumulative_reward, joint_cumulative_reward,
                               policy, sequence_policy)
from mergesim.intent import GRID
from mergesim.rewards import ObjectiveWeights, SocialOrientation
from mergesim.world import ACTIONS, DriverAction


def random_snapshot(rng, snapshot_of, road, n_neighbors):
    ego_lane = int(rng.integers(0, road.lane_count + 1))
    x0 = rng.uniform(50., 150.)
    states = {0: (x0, road.lane_center(ego_lane), rng.uniform(15., 30.))}
    for j in range(1, n_neighbors + 1):
        lane = int(np.clip(ego_lane + rng.integers(-1, 2), 0, road.lane_count))
        states[j] = (x0 + rng.uniform(-60., 60.), road.lane_center(lane), rng.uniform(15., 30.))
    return snapshot_of(states)


def random_intent(rng):
    sigma = list(SocialOrientation)[int(rng.integers(0, 4))]
    return sigma, ObjectiveWeights.normalized(rng.uniform(0.05, 1., size=3))


def test_pairwise_values_match_joint_enumeration(snapshot_of, road, kinematics, reward):
    rng = np.random.default_rng(2024)
    behavior = BehaviorConfig(horizon=2)
    worst = 0.
    for trial in range(20):
        snapshot = random_snapshot(rng, snapshot_of, road, 1 + trial % 2)
        sigma, w = random_intent(rng)
        values = InteractionValues(snapshot, 0, road, kinematics, reward, behavior)
        table = values.sequence_values(sigma, w)
        for m in rng.integers(0, 25, size=5):
            gamma = ActionSequence.from_index(int(m), 2)
            expected = joint_cumulative_reward(snapshot, 0, gamma, sigma, w, road, kinematics,
                                               reward, behavior)
            worst = max(worst, abs(table[gamma.index] - expected))
    assert worst <= 1e-9


def test_cumulative_reward_of_one_sequence(snapshot_of, road, kinematics, reward):
    snapshot = snapshot_of({0: (100., 1.75, 20.), 1: (80., 5.25, 22.)})
    sigma, w = SocialOrientation.PROSOCIAL, ObjectiveWeights.uniform()
    behavior = BehaviorConfig(horizon=2)
    gamma = (DriverAction.STEER_LEFT, DriverAction.STEER_LEFT)
    assert cumulative_reward(snapshot, 0, gamma, sigma, w, road, kinematics, reward, behavior) \
        == pytest.approx(joint_cumulative_reward(snapshot, 0, gamma, sigma, w, road, kinematics,
                                                 reward, behavior), abs=1e-12)
    with pytest.raises(ValueError):
        cumulative_reward(snapshot, 0, gamma[:1], sigma, w, road, kinematics, reward, behavior)


def test_distributions_are_normalized(snapshot_of, road, kinematics, reward):
    rng = np.random.default_rng(11)
    for trial in range(100):
        snapshot = random_snapshot(rng, snapshot_of, road, 1 + trial % 3)
        sigma, w = random_intent(rng)
        behavior = BehaviorConfig(temperature=float(rng.uniform(.2, 5.)))
        values = InteractionValues(snapshot, 0, road, kinematics, reward, behavior)
        assert values.policy(sigma, w).sum() == pytest.approx(1., abs=1e-9)
        assert values.sequence_policy(sigma, w).sum() == pytest.approx(1., abs=1e-9)


def test_infeasible_actions_get_no_mass(snapshot_of, road, kinematics, reward):
    snapshot = snapshot_of({0: (100., 1.75, 20.), 1: (80., 5.25, 22.)})
    sigma, w = SocialOrientation.EGOISTIC, ObjectiveWeights.uniform()
    p = policy(snapshot, 0, sigma, w, road, kinematics, reward)
    assert p[DriverAction.STEER_RIGHT] == 0.
    assert sum(p.values()) == pytest.approx(1.)

    sequences = sequence_policy(snapshot, 0, sigma, w, road, kinematics, reward)
    assert len(sequences) == 125
    assert all(prob == 0. for gamma, prob in sequences.items()
               if gamma.actions[0] is DriverAction.STEER_RIGHT)


def test_action_value_is_block_mean(snapshot_of, road, kinematics, reward):
    snapshot = snapshot_of({0: (100., 5.25, 20.), 1: (130., 5.25, 18.), 2: (90., 8.75, 25.)})
    sigma, w = SocialOrientation.COMPETITIVE, ObjectiveWeights(.5, .3, .2)
    values = InteractionValues(snapshot, 0, road, kinematics, reward)
    table = values.sequence_values(sigma, w)
    q = action_values(snapshot, 0, sigma, w, road, kinematics, reward)
    for a in ACTIONS:
        assert q[a] == pytest.approx(table[25 * int(a):25 * (int(a) + 1)].mean())


def test_effort_driver_keeps_constant_speed(snapshot_of, road, kinematics, reward, effort_only):
    snapshot = snapshot_of({1: (97., 5.25, 20.), 0: (100., 1.75, 20.), 4: (200., 8.75, 20.)})
    values = InteractionValues(snapshot, 1, road, kinematics, reward)
    assert values.best_action(SocialOrientation.EGOISTIC, effort_only) is DriverAction.MAINTAIN


def test_sampling_is_seeded(snapshot_of, road, kinematics, reward):
    snapshot = snapshot_of({0: (100., 5.25, 20.), 1: (130., 5.25, 18.)})
    values = InteractionValues(snapshot, 0, road, kinematics, reward)
    sigma, w = SocialOrientation.PROSOCIAL, ObjectiveWeights.uniform()
    first = [values.choose_action(sigma, w, "sample", np.random.default_rng(3)) for _ in range(5)]
    second = [values.choose_action(sigma, w, "sample", np.random.default_rng(3)) for _ in range(5)]
    assert first == second
    with pytest.raises(ValueError):
        values.choose_action(sigma, w, "greedy")


def test_values_are_shared_by_the_grid_cells(snapshot_of, road, kinematics, reward):
    snapshot = snapshot_of({0: (100., 5.25, 20.), 1: (130., 5.25, 18.)})
    values = InteractionValues(snapshot, 0, road, kinematics, reward)
    for cell in GRID:
        direct = action_values(snapshot, 0, cell.sigma, cell.w, road, kinematics, reward)
        np.testing.assert_allclose(values.action_values(cell.sigma, cell.w),
                                   [direct[a] for a in ACTIONS])


def test_no_neighbor(snapshot_of, road, kinematics):
    snapshot = snapshot_of({0: (100., 1.75, 20.), 1: (400., 5.25, 20.)})
    with pytest.raises(ValueError):
        InteractionValues(snapshot, 0, road, kinematics)


def test_sequence_index():
    gamma = ActionSequence((DriverAction.DECELERATE, DriverAction.MAINTAIN,
                            DriverAction.STEER_RIGHT))
    assert gamma.index == 2 * 25 + 0 * 5 + 4
    assert ActionSequence.from_index(gamma.index, 3) == gamma
    assert list(gamma) == list(gamma.actions)
    with pytest.raises(ValueError):
        ActionSequence(())


@pytest.mark.parametrize("params", [dict(horizon=0), dict(discount=1.5), dict(temperature=0.)])
def test_behavior_config_validation(params):
    with pytest.raises(ValueError):
        BehaviorConfig(**params)
