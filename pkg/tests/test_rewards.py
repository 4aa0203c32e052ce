# coding: utf-8

import numpy as np
import pytest

from mergesim.rewards import (W_OTHER, ObjectiveWeights, RewardConfig, RewardFeatures,
                              SafetyConfig, SocialOrientation, boxes_overlap,
                              collision_flag, effort, headway, headway_from_ttc,
                              off_road, pair_reward, personal_reward, progress,
                              svo_reward, time_to_collision)
from mergesim.world import DriverAction, VehicleState

SAFETY = SafetyConfig()


@pytest.mark.parametrize("sigma, theta", [
    (SocialOrientation.ALTRUISTIC, (0., 1.)),
    (SocialOrientation.PROSOCIAL, (.5, .5)),
    (SocialOrientation.EGOISTIC, (1., 0.)),
    (SocialOrientation.COMPETITIVE, (.5, -.5)),
])
def test_svo_thetas(sigma, theta):
    assert (sigma.theta_self, sigma.theta_other) == theta


def test_orientation_labels():
    assert SocialOrientation.from_label("Egoistic") is SocialOrientation.EGOISTIC
    with pytest.raises(ValueError):
        SocialOrientation.from_label("selfish")


def test_weights():
    w = ObjectiveWeights.parse("0,2/3,1/3")
    np.testing.assert_allclose(w.as_array(), [0., 2 / 3, 1 / 3])
    np.testing.assert_allclose(ObjectiveWeights.normalized([0, 1, 1]).as_array(), [0, .5, .5])
    np.testing.assert_allclose(W_OTHER.as_array(), [1 / 3] * 3)
    with pytest.raises(ValueError):
        ObjectiveWeights(.5, .5, .5)
    with pytest.raises(ValueError):
        ObjectiveWeights(-.5, 1., .5)
    with pytest.raises(ValueError):
        ObjectiveWeights.parse("a,b,c")
    with pytest.raises(ValueError):
        ObjectiveWeights.normalized([0, 0, 0])


def test_boxes_overlap():
    assert boxes_overlap(0., 5.25, 6., 5.25, SAFETY)
    assert boxes_overlap(0., 5.25, 0., 7.25, SAFETY)
    assert not boxes_overlap(0., 5.25, 7., 5.25, SAFETY)
    assert not boxes_overlap(0., 1.75, 0., 5.25, SAFETY)


def test_off_road(road):
    assert not off_road(100., 1.75, road, SAFETY)
    assert off_road(250., 1.75, road, SAFETY)
    assert not off_road(250., 5.25, road, SAFETY)
    assert off_road(100., 10., road, SAFETY)


def test_time_to_collision(road):
    ttc = time_to_collision(0., 5.25, 20., 20., 5.25, 10., road.lane_width, SAFETY)
    assert float(ttc) == pytest.approx(1.5)
    assert float(headway_from_ttc(ttc, SAFETY)) == pytest.approx(1.3 / 2.8)


def test_no_leader_gives_full_headway(road):
    # leader behind, leader faster, leader two lanes away
    for xj, vj, yj in [(-20., 10., 5.25), (20., 30., 5.25), (20., 10., 8.75 + 3.5)]:
        ttc = time_to_collision(0., 5.25, 20., xj, yj, vj, road.lane_width, SAFETY)
        assert np.isinf(ttc)
        assert float(headway_from_ttc(ttc, SAFETY)) == 1.


def test_vehicle_changing_lane_is_a_leader(road):
    ttc = time_to_collision(0., 1.75, 25., 30., 3.5, 20., road.lane_width, SAFETY)
    assert float(ttc) == pytest.approx(5.)
    # nearest center is still the ego lane
    ttc = time_to_collision(0., 1.75, 25., 30., 3.2, 20., road.lane_width, SAFETY)
    assert float(ttc) == pytest.approx(5.)


def test_vehicle_near_the_next_lane_center_is_not_a_leader(snapshot_of, road):
    snapshot = snapshot_of({0: (100., 5.25, 25.), 1: (120., 8.65, 15.)})
    assert headway(snapshot, 0, SAFETY, road) == 1.
    ttc = time_to_collision(100., 5.25, 25., 120., 8.65, 15., road.lane_width, SAFETY)
    assert np.isinf(ttc)
    ttc = time_to_collision(np.zeros(3), 5.25, 25., 20., np.array([3.6, 6.9, 7.1]), 15.,
                            road.lane_width, SAFETY)
    np.testing.assert_allclose(ttc, [1.5, 1.5, np.inf])


def test_headway_picks_nearest_leader(snapshot_of, road):
    snapshot = snapshot_of({0: (0., 5.25, 20.), 1: (20., 5.25, 10.), 2: (50., 5.25, 0.)})
    assert headway(snapshot, 0, SAFETY, road) == pytest.approx(1.3 / 2.8)


def test_progress(road):
    assert progress(VehicleState(150., 1.75, 20.), road, is_merging=True) == pytest.approx(.25)
    assert progress(VehicleState(150., 1.75, 20.), road) == pytest.approx(.5)
    assert progress(VehicleState(150., 3.5, 20.), road, is_merging=True) == pytest.approx(.5)
    assert progress(VehicleState(400., 5.25, 20.), road, mix=.5) == pytest.approx(1.)
    with pytest.raises(ValueError):
        progress(VehicleState(0., 1.75, 20.), road, mix=2.)


def test_effort():
    assert effort(DriverAction.MAINTAIN) == 1.
    assert effort(DriverAction.DECELERATE) == .5
    assert effort(DriverAction.STEER_LEFT) == .25
    assert effort(DriverAction.ACCELERATE, RewardConfig(e_speed=.7)) == .7


def test_reward_config_validation():
    with pytest.raises(ValueError):
        RewardConfig(e_lane=1.)
    with pytest.raises(ValueError):
        RewardConfig(ramp_mix=1.5)
    with pytest.raises(ValueError):
        SafetyConfig(t_min=3., t_max=1.)


def test_personal_reward():
    w = ObjectiveWeights(.2, .3, .5)
    features = RewardFeatures(False, 1., .5, .25)
    assert personal_reward(features, w) == pytest.approx(.2 + .15 + .125)
    assert personal_reward(RewardFeatures(True, 1., .5, .25), w) == 0.
    with pytest.raises(ValueError):
        RewardFeatures(False, 1.5, 0., 0.)


def test_pair_reward_is_zero_on_collision(road, reward):
    si, sj = VehicleState(100., 5.25, 20.), VehicleState(103., 5.25, 20.)
    assert pair_reward(si, DriverAction.MAINTAIN, sj, DriverAction.MAINTAIN, W_OTHER, road,
                       reward, 0.) == 0.


def test_pair_reward(road, reward, effort_only):
    si, sj = VehicleState(100., 5.25, 20.), VehicleState(150., 5.25, 20.)
    assert pair_reward(si, DriverAction.MAINTAIN, sj, DriverAction.MAINTAIN, effort_only,
                       road, reward, 0.) == 1.
    w = ObjectiveWeights(0., 1., 0.)
    assert pair_reward(si, DriverAction.STEER_LEFT, sj, DriverAction.MAINTAIN, w,
                       road, reward, 0.) == pytest.approx(100. / 300.)


def test_collision_flag(snapshot_of, road):
    snapshot = snapshot_of({0: (100., 1.75, 20.), 1: (104., 5.25, 20.), 2: (250., 5.25, 20.)})
    assert not collision_flag(snapshot, 0, road)
    snapshot = snapshot_of({0: (100., 3.5, 20.), 1: (104., 5.25, 20.)})
    assert collision_flag(snapshot, 0, road)
    snapshot = snapshot_of({0: (220., 1.75, 20.)})
    assert collision_flag(snapshot, 0, road)


def test_svo_reward_mixes_own_and_neighbor_rewards(snapshot_of, road, reward):
    snapshot = snapshot_of({0: (100., 1.75, 20.), 1: (60., 5.25, 25.), 2: (130., 5.25, 20.)})
    controls = {0: DriverAction.STEER_LEFT, 1: DriverAction.MAINTAIN,
                2: DriverAction.ACCELERATE}
    w = ObjectiveWeights(.2, .5, .3)

    own, other = [], []
    for j in (1, 2):
        si, sj = snapshot.state(0), snapshot.state(j)
        own.append(pair_reward(si, controls[0], sj, controls[j], w, road, reward, .5))
        other.append(pair_reward(sj, controls[j], si, controls[0], W_OTHER, road, reward, 0.))
    own, other = np.mean(own), np.mean(other)

    for sigma in SocialOrientation:
        expected = sigma.theta_self * own + sigma.theta_other * other
        assert svo_reward(snapshot, 0, controls, sigma, w, road, reward) == \
            pytest.approx(expected, abs=1e-12)


def test_svo_reward_needs_neighbors(snapshot_of, road, reward, effort_only):
    snapshot = snapshot_of({0: (100., 1.75, 20.), 1: (300., 5.25, 20.)})
    with pytest.raises(ValueError):
        svo_reward(snapshot, 0, {0: DriverAction.MAINTAIN}, SocialOrientation.EGOISTIC,
                   effort_only, road, reward)
    with pytest.raises(KeyError):
        svo_reward(snapshot, 5, {}, SocialOrientation.EGOISTIC, effort_only, road, reward)
