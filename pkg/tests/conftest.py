# coding: utf-8

import pytest

from mergesim.config import ModelConfig
from mergesim.rewards import ObjectiveWeights, RewardConfig
from mergesim.simulation import make_snapshot
from mergesim.world import KinematicsConfig, RoadGeometry, VehicleState


@pytest.fixture
def road():
    return RoadGeometry()


@pytest.fixture
def kinematics():
    return KinematicsConfig()


@pytest.fixture
def reward():
    return RewardConfig()


@pytest.fixture
def model():
    return ModelConfig()


@pytest.fixture
def effort_only():
    return ObjectiveWeights(0., 0., 1.)


@pytest.fixture
def snapshot_of(road):
    """ build a snapshot from {id: (x, y, v_x)} """
    def build(states, time=0, radius=100., merging=None, geometry=None):
        states = {i: VehicleState(*s) for i, s in states.items()}
        if merging is None:
            merging = [i for i, s in states.items() if s.y < (geometry or road).lane_width]
        return make_snapshot(time, states, geometry or road, radius, merging)
    return build
