"""Closed-loop episodes for the two highway scenarios.

The behavior planner runs every ``dt_bp`` seconds on a belief fabricated by
the scenario's sensor model; the motion planner runs every ``dt_mp`` seconds
and drives the ego with IDM clamped into the current action interval (see
:func:`raqmdp.highway.k_motion_command`). Other vehicles follow plain IDM.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .belief import BeliefState, Hypothesis, certain, default_feasibility
from .highway import CostWeights, MotionParams, k_motion_command
from .idm import DEFAULT_PARAMS, IdmParams, idm_raw, safe_distance, stopping_demand
from .planner import BehaviorPlanner, PlannerConfig
from .traffic import (
    VEHICLE_LENGTH,
    Lane,
    ObjectKind,
    RoadModel,
    RoadObject,
    VehicleState,
    WorldState,
    step_kinematics,
)

TELEMETRY_COLUMNS = ("time", "ego_y", "ego_vy", "ego_ay", "jerk", "gap", "headway")


@dataclass(frozen=True)
class LimitedRangeSensor:
    """Detects a stationary object somewhere around ``range`` metres ahead.

    ``range`` is a bumper-to-bumper distance from the ego front. Detection
    models: ``threshold`` detects as soon as the gap is within range;
    ``logistic`` draws a Bernoulli each check with probability ``p(gap)`` on a
    logistic curve through ``p(range) = p_at_range`` and
    ``p(range/2) = p_at_half``; ``logistic-tail`` uses that curve beyond the
    range and detects with certainty inside it.
    """

    range: float = 60.0
    detection: str = "threshold"
    p_at_range: float = 0.10
    p_at_half: float = 0.99
    prior: float = 0.10  # probability given to "object at the range edge"

    def __post_init__(self):
        if not (math.isfinite(self.range) and self.range > 0):
            raise ValueError(f"sensor.range must be > 0, got {self.range!r}")
        if self.detection not in ("threshold", "logistic", "logistic-tail"):
            raise ValueError(f"sensor.detection: unknown model {self.detection!r}")
        if not 0 < self.p_at_range < self.p_at_half < 1:
            raise ValueError("sensor: need 0 < p_at_range < p_at_half < 1")
        if not 0 < self.prior < 1:
            raise ValueError("sensor.prior must lie in (0, 1)")

    def detection_probability(self, gap: float) -> float:
        logit = lambda p: math.log(p / (1 - p))
        k = (logit(self.p_at_half) - logit(self.p_at_range)) / (0.5 * self.range)
        z = logit(self.p_at_range) - k * (gap - self.range)
        return 1.0 / (1.0 + math.exp(-z))

    def detects(self, gap: float, rng: np.random.Generator) -> bool:
        if self.detection == "threshold":
            return gap <= self.range
        if self.detection == "logistic-tail" and gap <= self.range:
            return True
        return bool(rng.random() < self.detection_probability(gap))


@dataclass(frozen=True)
class VelocityNoiseSensor:
    """Noisy longitudinal-velocity measurement of one tracked vehicle.

    The noise standard deviation decays as ``sigma0 * exp(-t / tau)`` with
    tracking time ``t``. Successive standardized errors follow an AR(1)
    process with lag-one ``correlation`` per decision period.
    """

    sigma0: float = 4.0
    tau: float = 3.0
    correlation: float = 1.0
    target: str = "mv"

    def __post_init__(self):
        if not self.sigma0 >= 0:
            raise ValueError(f"sensor.sigma0 must be >= 0, got {self.sigma0!r}")
        if not self.tau > 0:
            raise ValueError(f"sensor.tau must be > 0, got {self.tau!r}")
        if not 0 <= self.correlation <= 1:
            raise ValueError("sensor.correlation must lie in [0, 1]")

    def sigma(self, t: float) -> float:
        return self.sigma0 * math.exp(-t / self.tau)


SensorModel = Union[LimitedRangeSensor, VelocityNoiseSensor]


@dataclass(frozen=True)
class ObjectSpec:
    id: str
    y: float
    v: float = 0.0
    kind: ObjectKind = ObjectKind.VEHICLE
    lane: str = "main"
    x: Optional[float] = None


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    road: RoadModel
    sensor: SensorModel
    ego_y: float = 0.0
    ego_v: float = 105 / 3.6
    objects: Tuple[ObjectSpec, ...] = ()
    idm: IdmParams = DEFAULT_PARAMS
    cost: CostWeights = CostWeights()
    motion: MotionParams = MotionParams()
    duration: float = 60.0
    dt_bp: float = 0.5
    mp_per_bp: int = 10
    post_merge_time: float = 2.0
    stop_speed: float = 0.05

    def __post_init__(self):
        if self.name not in ("stationary-object", "ramp-merge"):
            raise ValueError(f"scenario.name: unknown scenario {self.name!r}")
        if not self.duration > 0:
            raise ValueError("episode.duration must be > 0")
        if self.mp_per_bp < 1 or not self.dt_bp > 0:
            raise ValueError("need dt_bp > 0 and mp_per_bp >= 1")
        if self.name == "stationary-object" and not isinstance(self.sensor, LimitedRangeSensor):
            raise ValueError("stationary-object scenario needs a limited-range sensor")
        if self.name == "ramp-merge":
            if not isinstance(self.sensor, VelocityNoiseSensor):
                raise ValueError("ramp-merge scenario needs a velocity-noise sensor")
            if self.road.merge_point is None:
                raise ValueError("ramp-merge scenario needs road.merge_point")
            if self.sensor.target not in [o.id for o in self.objects]:
                raise ValueError(f"sensor.target {self.sensor.target!r} is not a scenario object")

    @property
    def dt_mp(self) -> float:
        return self.dt_bp / self.mp_per_bp


def stationary_object_scenario(sensor_range: float = 60.0, distance: float = 400.0, **kwargs) -> ScenarioConfig:
    """Ego at desired speed, one stationary object ``distance`` metres ahead (gap)."""
    kw = dict(duration=60.0)
    kw.update(kwargs)
    sensor = kw.pop("sensor", LimitedRangeSensor(range=sensor_range))
    return ScenarioConfig(
        name="stationary-object",
        road=RoadModel(),
        sensor=sensor,
        objects=(ObjectSpec("object", y=distance + VEHICLE_LENGTH, kind=ObjectKind.STATIONARY),),
        **kw,
    )


def ramp_merge_scenario(merge_point: float = 150.0, mv_offset: float = 10.0, v0: float = 20.0, **kwargs) -> ScenarioConfig:
    """Ego on the main lane, merging vehicle on a parallel ramp, both at ``v0``."""
    kw = dict(duration=20.0, ego_v=v0)
    kw.update(kwargs)
    sensor = kw.pop("sensor", VelocityNoiseSensor())
    road = RoadModel(lanes=(Lane("main", 0.0), Lane("ramp", -3.7)), merge_point=merge_point, ramp_lane="ramp")
    return ScenarioConfig(
        name="ramp-merge",
        road=road,
        sensor=sensor,
        objects=(ObjectSpec("mv", y=mv_offset, v=v0, lane="ramp"),),
        **kw,
    )


def initial_world(sc: ScenarioConfig) -> WorldState:
    lanes = {lane.id: lane for lane in sc.road.lanes}
    ego = VehicleState(x=lanes[sc.road.main_lane].offset, y=sc.ego_y, vy=sc.ego_v)
    others = []
    for o in sc.objects:
        if o.lane not in lanes:
            raise ValueError(f"object {o.id!r}: unknown lane {o.lane!r}")
        x = lanes[o.lane].offset if o.x is None else o.x
        others.append(RoadObject(o.id, VehicleState(x=x, y=o.y, vy=o.v), o.kind, o.lane))
    return WorldState(ego=ego, others=tuple(others))


# --- beliefs -------------------------------------------------------------------


def scenario1_belief(
    world: WorldState,
    sensor: LimitedRangeSensor,
    detected: Optional[RoadObject] = None,
    hypotheses: str = "both",
) -> BeliefState:
    """Belief for the stationary-object scenario.

    ``world`` holds what is known without the undetected object. Before
    detection the belief has two hypotheses: an object sitting exactly at the
    sensor range (probability ``sensor.prior``) and a clear road. ``hypotheses``
    restricts this to ``"object"`` or ``"clear"`` for the fixed-belief
    baselines. After detection the belief is certain.
    """
    if detected is not None:
        return certain(world.with_object(detected))
    e = world.ego
    phantom = RoadObject(
        "phantom",
        VehicleState(x=e.x, y=e.y + VEHICLE_LENGTH + sensor.range),
        ObjectKind.STATIONARY,
    )
    present = Hypothesis("object-at-range", sensor.prior, add=(phantom,))
    clear = Hypothesis("clear", 1.0 - sensor.prior)
    if hypotheses == "both":
        hs = (present, clear)
    elif hypotheses == "object":
        hs = (replace(present, probability=1.0),)
    elif hypotheses == "clear":
        hs = (replace(clear, probability=1.0),)
    else:
        raise ValueError(f"unknown hypotheses selector {hypotheses!r}")
    return BeliefState(world=world, hypotheses=hs)


def scenario2_belief(world: WorldState, elapsed: float, sensor: VelocityNoiseSensor, z: float) -> BeliefState:
    """Gaussian belief on the tracked vehicle's longitudinal velocity.

    The reported mean is the true velocity plus ``sigma_N(elapsed) * z``
    (clipped at zero); the reported variance is ``sigma_N(elapsed)**2``.
    """
    sigma = sensor.sigma(elapsed)
    true_v = world.get(sensor.target).vy
    measured = max(0.0, true_v + sigma * z)
    measured_world = world.replace_state(sensor.target, replace(world.get(sensor.target), vy=measured))
    return BeliefState(
        world=measured_world,
        mean=np.array([measured]),
        covariance=np.array([[sigma * sigma]]),
        labels=((sensor.target, "vy"),),
    )


def noise_sequence(seed: int, n: int, correlation: float) -> np.ndarray:
    """Standardized AR(1) measurement errors, one per decision period."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5E45]))
    eps = rng.standard_normal(n)
    z = np.empty(n)
    z[0] = eps[0]
    s = math.sqrt(max(0.0, 1 - correlation**2))
    for k in range(1, n):
        z[k] = correlation * z[k - 1] + s * eps[k]
    return z


# --- telemetry -----------------------------------------------------------------


@dataclass
class Telemetry:
    rows: List[Tuple[float, ...]] = field(default_factory=list)
    bp: List[Dict] = field(default_factory=list)
    summary: Dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        i = TELEMETRY_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TELEMETRY_COLUMNS)
        for r in self.rows:
            w.writerow(["" if (isinstance(v, float) and math.isnan(v)) else repr(float(v)) for v in r])
        return buf.getvalue()


# --- episode -------------------------------------------------------------------


def same_lane_lead(world: WorldState, road: RoadModel, follower: str, visible=None) -> Optional[Tuple[float, float]]:
    """Gap and velocity of the nearest object ahead of ``follower`` in its effective lane."""
    f = world.get(follower)
    lane = road.effective_lane(world.lane_of(follower), f.y)
    best = None
    candidates = [("ego", world.ego, road.main_lane)] + [(o.id, o.state, o.lane) for o in world.others]
    for oid, s, olane in candidates:
        if oid == follower or (visible is not None and oid not in visible and oid != "ego"):
            continue
        if road.effective_lane(olane, s.y) != lane or s.y <= f.y:
            continue
        gap = s.y - f.y - VEHICLE_LENGTH
        if best is None or gap < best[0]:
            best = (gap, s.vy)
    return best


def find_collision(world: WorldState, road: RoadModel) -> Optional[Tuple[str, str, float]]:
    entries = [("ego", world.ego, road.main_lane)] + [(o.id, o.state, o.lane) for o in world.others]
    placed = [(oid, road.effective_lane(lane, s.y), s) for oid, s, lane in entries]
    for i in range(len(placed)):
        for j in range(i + 1, len(placed)):
            a, b = placed[i], placed[j]
            if a[1] == b[1] and abs(a[2].y - b[2].y) < VEHICLE_LENGTH:
                return a[0], b[0], abs(a[2].vy - b[2].vy)
    return None


def ego_command(a_prev: float, gap, v: float, interval, p: IdmParams, decay: float) -> float:
    """Motion-planner acceleration.

    Same law as the planning model, except that a tracked lead may override
    the interval's lower bound. The override takes the stronger of IDM and
    the constant deceleration that stops ``s0`` behind the lead.
    """
    lo, hi = interval
    if gap is not None and gap[0] <= 0:
        a_idm = -p.b_max
    else:
        a_idm = idm_raw(v, gap, p)
        if gap is not None:
            a_idm = min(a_idm, stopping_demand(v, gap[0], gap[1], p))
    a = float(k_motion_command(a_prev, a_idm, gap is not None, lo, hi, _pack(p), decay))
    if v <= 0.0 and a < 0.0:
        a = 0.0
    return a


_PACK_CACHE: Dict[IdmParams, np.ndarray] = {}


def _pack(p: IdmParams) -> np.ndarray:
    arr = _PACK_CACHE.get(p)
    if arr is None:
        from .idm import params_array

        arr = _PACK_CACHE[p] = params_array(p)
    return arr


def belief_for(planner_kind: str, sc: ScenarioConfig, world: WorldState, state: Dict) -> BeliefState:
    """What the given planner believes at a decision tick."""
    if sc.name == "stationary-object":
        known = world.without_object("object")
        detected = state["detected_object"]
        selector = {"mcts-p0": "clear", "mcts-p1": "object"}.get(planner_kind, "both")
        if planner_kind not in ("ra-qmdp", "mcts-p0", "mcts-p1"):
            raise ValueError(f"planner {planner_kind!r} does not apply to the stationary-object scenario")
        return scenario1_belief(known, sc.sensor, detected, selector)
    sensor = sc.sensor
    if planner_kind == "mcts-genie":
        return certain(world)
    b = scenario2_belief(world, state["time"], sensor, state["z"])
    if planner_kind == "mcts-noisy":
        return certain(b.world)
    if planner_kind != "ra-qmdp":
        raise ValueError(f"planner {planner_kind!r} does not apply to the ramp-merge scenario")
    return b


def run_episode(sc: ScenarioConfig, pc: PlannerConfig, seed: int = 0) -> Telemetry:
    """Simulate one episode; deterministic in ``(sc, pc, seed)``."""
    world = initial_world(sc)
    road = sc.road
    p = sc.idm
    dt = sc.dt_mp
    decay = math.exp(-dt / sc.motion.tau)
    planner = BehaviorPlanner(pc, road, sc.cost, p, sc.motion, dt=sc.dt_bp, feasibility=default_feasibility(road))
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xDE7EC7]))
    n_bp = int(math.ceil(sc.duration / sc.dt_bp)) + 1
    z = noise_sequence(seed, n_bp, sc.sensor.correlation) if isinstance(sc.sensor, VelocityNoiseSensor) else None

    tel = Telemetry()
    state: Dict = {"detected_object": None, "time": 0.0, "z": 0.0}
    n_ticks = int(round(sc.duration / dt))
    interval = (0.0, 0.0)
    crash = None
    detection_time = None
    detection_gap = None
    merge_snapshot = None
    merge_tick = None
    end_reason = "duration"
    approach_v: List[float] = []
    min_gap = math.inf
    a_prev = world.ego.ay

    for tick in range(n_ticks):
        t = tick * dt
        state["time"] = t
        # perception
        if sc.name == "stationary-object" and state["detected_object"] is None:
            obj = next(o for o in world.others if o.id == "object")
            gap = obj.state.y - world.ego.y - VEHICLE_LENGTH
            if sc.sensor.detects(gap, rng):
                state["detected_object"] = obj
                detection_time, detection_gap = t, gap
        # behavior planner
        if tick % sc.mp_per_bp == 0:
            k = tick // sc.mp_per_bp
            if z is not None:
                state["z"] = float(z[k])
            belief = belief_for(pc.kind, sc, world, state)
            decision = planner.decide(belief, (int(seed), k))
            interval = (decision.action.lo, decision.action.hi)
            tel.bp.append(
                {
                    "time": round(t, 10),
                    "action": str(decision.action),
                    "q_mean": [float(x) for x in decision.estimate.mean],
                    "q_var": [float(x) for x in decision.estimate.variance],
                    "sigma_points": decision.n_points,
                    "root_visits": decision.root_visits,
                }
            )
        # motion planner and other traffic
        visible = None
        if sc.name == "stationary-object":
            visible = {"object"} if state["detected_object"] is not None else set()
        lead = same_lane_lead(world, road, "ego", visible)
        a_ego = ego_command(a_prev, lead, world.ego.vy, interval, p, decay)
        new_others = []
        for o in world.others:
            if o.kind == ObjectKind.STATIONARY:
                new_others.append(o)
                continue
            olead = same_lane_lead(world, road, o.id)
            if olead is not None and olead[0] <= 0:
                a_o = -p.b_max
            else:
                a_o = min(max(idm_raw(o.state.vy, olead, p), -p.b_max), p.a_max)
            new_others.append(replace(o, state=step_kinematics(o.state, a_o, dt, sc.motion.v_cap)))
        ego = step_kinematics(world.ego, a_ego, dt, sc.motion.v_cap)
        world = WorldState(ego=ego, others=tuple(new_others), time=t + dt)

        jerk = (a_ego - a_prev) / dt
        a_prev = a_ego
        true_lead = same_lane_lead(world, road, "ego")
        gap_now = true_lead[0] if true_lead is not None else math.nan
        headway = gap_now / ego.vy if (true_lead is not None and ego.vy > 0) else math.nan
        if true_lead is not None:
            min_gap = min(min_gap, gap_now)
        tel.rows.append((round(t + dt, 10), ego.y, ego.vy, a_ego, jerk, gap_now, headway))

        if sc.name == "stationary-object":
            if state["detected_object"] is None:
                approach_v.append(ego.vy)
        elif merge_snapshot is None:
            approach_v.append(ego.vy)
            if ego.y + VEHICLE_LENGTH >= road.merge_point:
                merge_tick = len(tel.rows) - 1
                merge_snapshot = _merge_snapshot(world, sc)

        crash = find_collision(world, road)
        if crash is not None:
            end_reason = "crash"
            break
        if sc.name == "stationary-object" and state["detected_object"] is not None and ego.vy <= sc.stop_speed:
            end_reason = "stopped"
            break
        if merge_tick is not None and (len(tel.rows) - 1 - merge_tick) * dt >= sc.post_merge_time:
            end_reason = "merged"
            break

    jerks = np.abs(tel.column("jerk"))
    vy = tel.column("ego_vy")
    summary = {
        "scenario": sc.name,
        "planner": pc.kind,
        "alpha": pc.risk.alpha,
        "epsilon": pc.search.epsilon,
        "seed": int(seed),
        "end_reason": end_reason,
        "crash": crash is not None,
        "duration": round(len(tel.rows) * dt, 10),
        "avg_velocity": float(np.mean(approach_v)) if approach_v else float(np.mean(vy)),
        "avg_velocity_episode": float(np.mean(vy)),
        "max_abs_jerk": float(np.max(jerks)) if len(jerks) else 0.0,
        "min_gap": None if math.isinf(min_gap) else float(min_gap),
    }
    if isinstance(sc.sensor, LimitedRangeSensor):
        summary["sensor_range"] = sc.sensor.range
        summary["detection_time"] = detection_time
        summary["detection_gap"] = detection_gap
    if crash is not None:
        summary["crash_with"] = crash[1] if crash[0] == "ego" else crash[0]
        summary["crash_closing_speed"] = crash[2]
    if sc.name == "ramp-merge":
        summary["merge"] = merge_snapshot
        upto = jerks[: merge_tick + 1] if merge_tick is not None else jerks
        summary["max_abs_jerk_to_merge"] = float(np.max(upto)) if len(upto) else 0.0
    tel.summary = summary
    return tel


def _merge_snapshot(world: WorldState, sc: ScenarioConfig) -> Dict:
    ego = world.ego
    mv = world.get(sc.sensor.target)
    dist = mv.y - ego.y - VEHICLE_LENGTH
    return {
        "time": round(world.time, 10),
        "ego_y": ego.y,
        "ego_velocity": ego.vy,
        "mv_y": mv.y,
        "mv_velocity": mv.vy,
        "distance_to_mv": dist,
        "time_headway": dist / ego.vy if (mv.y > ego.y and ego.vy > 0) else None,
    }


def safe_distance_at_stop(v: float, p: IdmParams = DEFAULT_PARAMS) -> float:
    """``s*(v, 0)``: the gap needed to stop behind a stationary object."""
    return safe_distance(v, 0.0, p)
