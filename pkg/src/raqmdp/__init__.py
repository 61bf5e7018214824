"""Risk-averse QMDP behavior planning for highway driving.

A belief over the road world is reduced to unscented sigma points, a Monte
Carlo tree search runs on each point, and actions are ranked by the weighted
mean of their values minus a variance penalty.
"""

from .belief import BeliefState, Hypothesis, SigmaPoint, SigmaPointSet, generate_sigma_points, reconstruct_moments
from .highway import LANE_KEEP_ACTIONS, BpAction, CostWeights, HighwayMdp, MotionParams
from .idm import DEFAULT_PARAMS, IdmParams, idm_accel, safe_distance
from .mcts import MDP, SearchConfig, SearchResult, TabularMdp, TreeSearch, search
from .planner import BehaviorPlanner, PlannerConfig
from .qmdp import QmdpEstimate, RiskConfig, aggregate, select_risk_averse
from .simulator import (
    LimitedRangeSensor,
    ScenarioConfig,
    Telemetry,
    VelocityNoiseSensor,
    ramp_merge_scenario,
    run_episode,
    stationary_object_scenario,
)
from .traffic import Lane, ObjectKind, RoadModel, RoadObject, VehicleState, WorldState

__version__ = "0.1.0"
