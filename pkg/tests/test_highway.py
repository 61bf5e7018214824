import math

import numpy as np
import pytest

from raqmdp.highway import (
    LANE_KEEP_ACTIONS,
    ROLLOUT_INTERVAL,
    BpAction,
    CostWeights,
    HighwayMdp,
    MotionParams,
    build_mdp_for_sigma_point,
    k_motion_command,
    others_array,
)
from raqmdp.idm import DEFAULT_PARAMS, params_array
from raqmdp.traffic import Lane, ObjectKind, RoadModel, RoadObject, VehicleState, WorldState

V_DES = 105 / 3.6
P = params_array(DEFAULT_PARAMS)


def box_world(gap, v=V_DES):
    return WorldState(ego=VehicleState(vy=v), others=(RoadObject("box", VehicleState(y=gap + 5.0), ObjectKind.STATIONARY),))


def test_action_set():
    assert [(a.lo, a.hi) for a in LANE_KEEP_ACTIONS] == [(-8, -2), (-2, -1), (-1, 0), (0, 1), (1, 2)]
    assert str(LANE_KEEP_ACTIONS[0]) == "LaneKeep[-8,-2]"
    with pytest.raises(ValueError, match="empty"):
        BpAction(1.0, 0.0)
    with pytest.raises(ValueError, match="unsupported"):
        BpAction(0.0, 1.0, kind="LaneChange")


def test_ego_alone_at_desired_speed_costs_nothing():
    mdp = HighwayMdp(WorldState(ego=VehicleState(vy=V_DES)), RoadModel())
    s0 = mdp.initial_state()
    s1 = mdp.transition(s0, BpAction(0.0, 1.0))
    assert mdp.reward(s0, BpAction(0.0, 1.0), s1) == pytest.approx(0.0, abs=1e-9)
    assert s1[2] == pytest.approx(V_DES, abs=1e-9)
    assert not mdp.is_terminal(s1)


@pytest.mark.parametrize("action", LANE_KEEP_ACTIONS)
def test_crash_unavoidable_ten_metres_from_object(action):
    w = CostWeights()
    mdp = HighwayMdp(box_world(10.0), RoadModel())
    s = mdp.transition(mdp.initial_state(), action)
    total = s[5]
    for _ in range(14):
        if mdp.is_terminal(s):
            break
        s = mdp.transition(s, ROLLOUT_INTERVAL)
        total += s[5]
    assert mdp.is_terminal(s)
    assert total <= -w.crash


def test_stopping_distance_exceeds_ten_metres():
    assert V_DES**2 / (2 * DEFAULT_PARAMS.b_max) == pytest.approx(53.17, abs=0.01)


def test_other_vehicles_keep_constant_velocity():
    road = RoadModel(lanes=(Lane("main", 0.0), Lane("ramp", -3.7)), merge_point=300.0, ramp_lane="ramp")
    w = WorldState(ego=VehicleState(vy=20.0), others=(RoadObject("mv", VehicleState(y=10.0, vy=25.0), lane="ramp"),))
    mdp = HighwayMdp(w, road)
    for k in range(16):
        assert mdp.object_position(0, k) == pytest.approx(10.0 + 25.0 * 0.5 * k)


def test_others_array_layout():
    road = RoadModel(lanes=(Lane("main", 0.0), Lane("ramp", -3.7)), merge_point=300.0, ramp_lane="ramp")
    w = WorldState(
        ego=VehicleState(),
        others=(
            RoadObject("mv", VehicleState(y=10.0, vy=25.0), lane="ramp"),
            RoadObject("box", VehicleState(y=50.0, vy=3.0), ObjectKind.STATIONARY),
        ),
    )
    arr = others_array(w, road, unseen=("box",))
    assert arr.tolist() == [[10.0, 25.0, 1.0, 1.0, 0.0], [50.0, 0.0, 0.0, 0.0, 1.0]]
    assert others_array(WorldState(ego=VehicleState()), road).shape == (0, 5)


def test_unseen_object_ignored_by_ego_during_first_period_only():
    # a hypothesised object just inside IDM reach: with [-8, 0] the seen case brakes
    seen = HighwayMdp(box_world(80.0), RoadModel())
    unseen = HighwayMdp(box_world(80.0), RoadModel(), unseen=("box",))
    a = BpAction(-8.0, 0.0)
    s_seen = seen.transition(seen.initial_state(), a)
    s_unseen = unseen.transition(unseen.initial_state(), a)
    assert s_unseen[2] > s_seen[2]
    # from the second period on both models react alike
    later_seen = seen.transition(s_unseen, a)
    later_unseen = unseen.transition(s_unseen, a)
    assert later_seen[:4] == pytest.approx(later_unseen[:4])


def test_unseen_object_still_counts_for_crashes():
    mdp = HighwayMdp(box_world(3.0), RoadModel(), unseen=("box",))
    s = mdp.transition(mdp.initial_state(), BpAction(1.0, 2.0))
    assert mdp.is_terminal(s) and s[5] <= -CostWeights().crash


def test_motion_command_holds_interval_without_override():
    for a_idm in (-20.0, -3.0, 0.5, 5.0):
        a = k_motion_command(0.0, a_idm, False, -1.0, 0.0, P, 0.0)
        assert -1.0 <= a <= 0.0


def test_motion_command_override_lowers_floor_only():
    assert k_motion_command(0.0, -5.0, True, -1.0, 0.0, P, 0.0) == -5.0
    assert k_motion_command(0.0, -20.0, True, -1.0, 0.0, P, 0.0) == -8.0
    assert k_motion_command(0.0, 5.0, True, -1.0, 0.0, P, 0.0) == 0.0


def test_motion_command_lag_and_emergency_bypass():
    decay = math.exp(-0.05 / 0.5)
    # moderate targets are tracked through the lag
    assert k_motion_command(0.0, 1.0, False, 0.0, 2.0, P, decay) == pytest.approx(1.0 - decay)
    # hard braking applies at once
    assert k_motion_command(0.0, -6.0, False, -8.0, -2.0, P, decay) == -6.0


@pytest.mark.parametrize(
    "kwargs",
    [dict(closeness=-1.0), dict(crash=math.inf), dict(jerk=math.nan)],
)
def test_cost_weight_validation_names_field(kwargs):
    with pytest.raises(ValueError, match=f"CostWeights.{next(iter(kwargs))}"):
        CostWeights(**kwargs)


def test_cost_weights_not_all_zero():
    with pytest.raises(ValueError, match="positive"):
        CostWeights(0.0, 0.0, 0.0, 0.0, 0.0)


def test_model_validation():
    with pytest.raises(ValueError):
        HighwayMdp(box_world(50.0), RoadModel(), substeps=0)
    with pytest.raises(ValueError):
        HighwayMdp(box_world(50.0), RoadModel(), rollout_noise=-1.0)
    with pytest.raises(ValueError):
        MotionParams(tau=0.0)


def test_builder_and_compiled_search_are_deterministic():
    from raqmdp.mcts import SearchConfig

    mdp = build_mdp_for_sigma_point(box_world(120.0), RoadModel(), rollout_noise=0.5)
    cfg = SearchConfig(budget=2000)
    a, b = mdp.search(cfg, 11), mdp.search(cfg, 11)
    assert np.array_equal(a.q, b.q) and np.array_equal(a.n, b.n)
    assert a.n.sum() == 2000 and np.all(np.isfinite(a.q))
