# coding: utf-8

from .world import (DriverAction, KinematicsConfig, RoadGeometry, TrafficSnapshot,
                    VehicleState, rollout, step)
from .rewards import ObjectiveWeights, RewardConfig, SafetyConfig, SocialOrientation
from .behavior import BehaviorConfig, InteractionValues
from .intent import GRID, IntentBelief, init_belief
from .planner import PlannerConfig, plan
from .config import ModelConfig, ScenarioError, load_config
from .simulation import ScenarioConfig, SimOutcome, Verdict, run

from . import world
from . import rewards
from . import behavior
from . import intent
from . import planner
from . import simulation
from . import highd
