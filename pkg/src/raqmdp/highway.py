"""Planning model of the highway around one concrete world sample.

The ego vehicle follows IDM clamped into the chosen acceleration interval,
tracked through the motion planner's first-order lag. Every other object keeps
its current velocity. The hot loops are compiled with numba; a tree state is
the tuple ``(step, y, v, a, crashed, edge_reward)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from numba import njit

from .idm import DEFAULT_PARAMS, IdmParams, params_array
from .mcts import MDP, SearchConfig, SearchResult
from .traffic import VEHICLE_LENGTH, ObjectKind, RoadModel, WorldState

ACCEL_INTERVALS: Tuple[Tuple[float, float], ...] = (
    (-8.0, -2.0),
    (-2.0, -1.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (1.0, 2.0),
)
ROLLOUT_INTERVAL = (-8.0, 0.0)


@dataclass(frozen=True)
class BpAction:
    """LaneKeep with a longitudinal acceleration interval."""

    lo: float
    hi: float
    kind: str = "LaneKeep"

    def __post_init__(self):
        if self.kind != "LaneKeep":
            raise ValueError(f"unsupported high-level action {self.kind!r}")
        if not self.lo <= self.hi:
            raise ValueError(f"empty acceleration interval [{self.lo}, {self.hi}]")

    def __str__(self):
        return f"{self.kind}[{self.lo:g},{self.hi:g}]"


LANE_KEEP_ACTIONS: Tuple[BpAction, ...] = tuple(BpAction(lo, hi) for lo, hi in ACCEL_INTERVALS)


@dataclass(frozen=True)
class CostWeights:
    closeness: float = 100.0
    crash: float = 1000.0
    hard_brake: float = 2.0
    jerk: float = 0.5
    velocity: float = 10.0

    def __post_init__(self):
        for name in ("closeness", "crash", "hard_brake", "jerk", "velocity"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"CostWeights.{name} must be finite and >= 0, got {value!r}")
        if not np.any(self.as_array() > 0):
            raise ValueError("at least one cost weight must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.closeness, self.crash, self.hard_brake, self.jerk, self.velocity], dtype=np.float64)


@dataclass(frozen=True)
class MotionParams:
    """Motion-planner execution model shared by the simulator and the tree."""

    tau: float = 0.5  # acceleration tracking time constant [s]
    length: float = VEHICLE_LENGTH
    v_cap: float = 70.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")


# --- compiled kernels --------------------------------------------------------
# idm params layout: s0, rho, v_desired, a_max, b_safe, b_max
# cost weights layout: closeness, crash, hard_brake, jerk, velocity
# others rows: y0, v, is_ramp, is_vehicle, unseen


@njit(cache=True)
def k_safe_distance(v, v_lead, p):
    vr = v + p[1] * p[3]
    d = v * p[1] + 0.5 * p[3] * p[1] * p[1] + vr * vr / (2.0 * p[4]) - v_lead * v_lead / (2.0 * p[5])
    return max(p[0], d)


@njit(cache=True)
def k_idm(v, gap, v_lead, p):
    free = (v / p[2]) ** 4
    if gap == np.inf:
        return p[3] * (1.0 - free)
    if gap <= 0.0:
        return -p[5]
    r = k_safe_distance(v, max(v_lead, 0.0), p) / gap
    return p[3] * (1.0 - free - r * r)


@njit(cache=True)
def k_motion_command(a_prev, a_idm, override, lo, hi, p, decay):
    """Executed acceleration for one tick.

    The interval's upper bound always holds. With ``override`` set (a lead
    vehicle is tracked by the motion planner) its lower bound gives way when
    IDM demands more braking. Braking beyond ``b_safe`` is applied at once,
    anything else is tracked through the first-order lag.
    """
    if override and a_idm < lo:
        target = max(a_idm, -p[5])
    else:
        target = min(max(a_idm, lo), hi)
        target = min(max(target, -p[5]), p[3])
    if target <= -p[4] and target < a_prev:
        return target
    return target + (a_prev - target) * decay


@njit(cache=True)
def k_step(y, v, a, h, v_cap):
    v1 = v + a * h
    if v1 < 0.0:
        t = -v / a if a < 0.0 else 0.0
        return y + v * t + 0.5 * a * t * t, 0.0
    if v1 > v_cap:
        t = (v_cap - v) / a if a > 0.0 else 0.0
        return y + v * t + 0.5 * a * t * t + v_cap * (h - t), v_cap
    return y + v * h + 0.5 * a * h * h, v1


@njit(cache=True)
def k_in_lane(yo, is_ramp, merge, length):
    return is_ramp < 0.5 or yo + length >= merge


@njit(cache=True)
def k_lead(t, y, others, merge, length, see_all):
    best = np.inf
    vl = 0.0
    for i in range(others.shape[0]):
        if not see_all and others[i, 4] > 0.5:
            continue
        yo = others[i, 0] + others[i, 1] * t
        if not k_in_lane(yo, others[i, 2], merge, length):
            continue
        if yo > y:
            g = yo - y - length
            if g < best:
                best = g
                vl = others[i, 1]
    return best, vl


@njit(cache=True)
def k_advance(t0, y, v, a, lo, hi, noise, dt, n_sub, others, merge, p, w, tau, length, v_cap):
    """Integrate the ego over one decision period.

    Returns ``(y, v, a, crashed, cost)``.
    """
    h = dt / n_sub
    decay = math.exp(-h / tau)
    cost = 0.0
    vdes = p[2]
    # hypothesised objects are undetected now, so the motion planner cannot
    # react to them before the next decision
    see_all = t0 > 0.0
    for j in range(n_sub):
        t = t0 + j * h
        gap, vl = k_lead(t, y, others, merge, length, see_all)
        a_idm = k_idm(v, gap, vl, p) + noise
        # the planning model holds the interval strictly; only the executing
        # motion planner may override its lower bound
        a_new = k_motion_command(a, a_idm, False, lo, hi, p, decay)
        if v <= 0.0 and a_new < 0.0:
            a_new = 0.0  # standstill: brakes hold, no reversing
        y_new, v_new = k_step(y, v, a_new, h, v_cap)
        t1 = t + h
        jerk = (a_new - a) / h
        dv = (v_new - vdes) / vdes
        hb = -a_new - p[4]
        cost += w[4] * dv * dv * h + w[3] * jerk * jerk * h
        if hb > 0.0:
            cost += w[2] * hb * hb * h
        crashed = False
        closing = 0.0
        for i in range(others.shape[0]):
            yo0 = others[i, 0] + others[i, 1] * t
            yo = others[i, 0] + others[i, 1] * t1
            if not k_in_lane(yo, others[i, 2], merge, length):
                continue
            vo = others[i, 1]
            if abs(yo - y_new) < length or (yo0 > y and yo <= y_new):
                crashed = True
                closing = abs(v_new - vo)
                break
            if yo > y_new:
                sstar = k_safe_distance(v_new, vo, p)
                short = (sstar - (yo - y_new - length)) / sstar
            elif others[i, 3] > 0.5:
                sstar = k_safe_distance(vo, v_new, p)
                short = (sstar - (y_new - yo - length)) / sstar
            else:
                short = 0.0
            if short > 0.0:
                cost += w[0] * short * short * h
        y, v, a = y_new, v_new, a_new
        if crashed:
            cost += w[1] * (1.0 + (closing / vdes) ** 2)
            return y, v, a, True, cost
    return y, v, a, False, cost


@njit(cache=True)
def k_rollout(step, y, v, a, noises, discount, dt, n_sub, others, merge, p, w, tau, length, v_cap):
    """Discounted return of the rollout policy (IDM limited to [-b_max, 0])."""
    total = 0.0
    g = 1.0
    for k in range(noises.shape[0]):
        t0 = (step + k) * dt
        y, v, a, crashed, cost = k_advance(
            t0, y, v, a, -p[5], 0.0, noises[k], dt, n_sub, others, merge, p, w, tau, length, v_cap
        )
        total -= g * cost
        g *= discount
        if crashed:
            break
    return total


@njit(cache=True, nogil=True)
def k_search(y0, v0, a0, lo, hi, budget, depth, c, epsilon, discount, noise_std, seed,
             dt, n_sub, others, merge, p, w, tau, length, v_cap):
    """Tree search over the highway model; same algorithm as ``mcts.TreeSearch``.

    Returns root ``(q, n, node_count)``.
    """
    np.random.seed(seed)
    n_act = lo.shape[0]
    cap = budget + 1
    ny = np.empty(cap)
    nv = np.empty(cap)
    na = np.empty(cap)
    nstep = np.empty(cap, dtype=np.int64)
    nterm = np.zeros(cap, dtype=np.bool_)
    nreward = np.zeros(cap)
    child = -np.ones((cap, n_act), dtype=np.int64)
    visits = np.zeros(cap, dtype=np.int64)
    nsa = np.zeros((cap, n_act), dtype=np.int64)
    qsa = np.zeros((cap, n_act))
    ny[0] = y0
    nv[0] = v0
    na[0] = a0
    nstep[0] = 0
    count = 1
    path_node = np.empty(depth, dtype=np.int64)
    path_act = np.empty(depth, dtype=np.int64)
    for _ in range(budget):
        node = 0
        d = 0
        plen = 0
        leaf = 0.0
        while (not nterm[node]) and d < depth:
            a_idx = -1
            if d == 0 and epsilon > 0.0 and (epsilon >= 1.0 or np.random.random() < epsilon):
                best_n = nsa[node, 0]
                a_idx = 0
                for i in range(1, n_act):
                    if nsa[node, i] < best_n:
                        best_n = nsa[node, i]
                        a_idx = i
            else:
                for i in range(n_act):
                    if nsa[node, i] == 0:
                        a_idx = i
                        break
                if a_idx < 0:
                    log_n = math.log(visits[node])
                    best_val = -np.inf
                    for i in range(n_act):
                        val = qsa[node, i] + c * math.sqrt(log_n / nsa[node, i])
                        if val > best_val:
                            best_val = val
                            a_idx = i
            path_node[plen] = node
            path_act[plen] = a_idx
            plen += 1
            ch = child[node, a_idx]
            if ch < 0:
                step = nstep[node]
                yn, vn, an, crashed, cost = k_advance(
                    step * dt, ny[node], nv[node], na[node], lo[a_idx], hi[a_idx], 0.0,
                    dt, n_sub, others, merge, p, w, tau, length, v_cap,
                )
                ch = count
                count += 1
                ny[ch] = yn
                nv[ch] = vn
                na[ch] = an
                nstep[ch] = step + 1
                nterm[ch] = crashed
                nreward[ch] = -cost
                child[node, a_idx] = ch
                remaining = depth - d - 1
                if remaining > 0 and not crashed:
                    noises = np.zeros(remaining)
                    if noise_std > 0.0:
                        for k in range(remaining):
                            noises[k] = noise_std * np.random.standard_normal()
                    leaf = k_rollout(step + 1, yn, vn, an, noises, discount, dt, n_sub,
                                     others, merge, p, w, tau, length, v_cap)
                break
            node = ch
            d += 1
        g = leaf
        for j in range(plen - 1, -1, -1):
            nd = path_node[j]
            ai = path_act[j]
            g = nreward[child[nd, ai]] + discount * g
            visits[nd] += 1
            nsa[nd, ai] += 1
            qsa[nd, ai] += (g - qsa[nd, ai]) / nsa[nd, ai]
    return qsa[0].copy(), nsa[0].copy(), count


# --- Python surface -----------------------------------------------------------


def others_array(world: WorldState, road: RoadModel, unseen: Sequence[str] = ()) -> np.ndarray:
    """Pack the other objects for the kernels; ``unseen`` ids are hypothesised."""
    rows = []
    for o in world.others:
        is_ramp = 1.0 if (road.ramp_lane is not None and o.lane == road.ramp_lane) else 0.0
        is_vehicle = 1.0 if o.kind == ObjectKind.VEHICLE else 0.0
        v = 0.0 if o.kind == ObjectKind.STATIONARY else o.state.vy
        rows.append((o.state.y, v, is_ramp, is_vehicle, 1.0 if o.id in unseen else 0.0))
    return np.array(rows, dtype=np.float64).reshape(-1, 5)


class HighwayMdp(MDP):
    """Deterministic single-lane longitudinal MDP around one world sample."""

    def __init__(
        self,
        world: WorldState,
        road: RoadModel,
        cost: CostWeights = CostWeights(),
        idm: IdmParams = DEFAULT_PARAMS,
        motion: MotionParams = MotionParams(),
        dt: float = 0.5,
        substeps: int = 5,
        rollout_noise: float = 0.0,
        actions: Sequence[BpAction] = LANE_KEEP_ACTIONS,
        unseen: Sequence[str] = (),
    ):
        if substeps < 1:
            raise ValueError("substeps must be >= 1")
        if rollout_noise < 0:
            raise ValueError("rollout_noise must be >= 0")
        self.world = world
        self.road = road
        self.cost = cost
        self.idm = idm
        self.motion = motion
        self.dt = float(dt)
        self.substeps = int(substeps)
        self.rollout_noise = float(rollout_noise)
        self._actions = list(actions)
        self._others = others_array(world, road, tuple(unseen))
        self._merge = math.inf if road.merge_point is None else float(road.merge_point)
        self._p = params_array(idm)
        self._w = cost.as_array()

    def initial_state(self) -> tuple:
        e = self.world.ego
        return (0, e.y, e.vy, e.ay, False, 0.0)

    def actions(self, state):
        return self._actions

    def is_terminal(self, state) -> bool:
        return bool(state[4])

    def _advance(self, state, lo, hi, noise=0.0):
        step, y, v, a = state[0], state[1], state[2], state[3]
        return k_advance(
            step * self.dt, y, v, a, lo, hi, noise, self.dt, self.substeps, self._others, self._merge,
            self._p, self._w, self.motion.tau, self.motion.length, self.motion.v_cap,
        )

    def transition(self, state, action):
        lo, hi = (action.lo, action.hi) if isinstance(action, BpAction) else action
        y, v, a, crashed, cost = self._advance(state, lo, hi)
        return (state[0] + 1, y, v, a, bool(crashed), -cost)

    def reward(self, state, action, next_state) -> float:
        return next_state[5]

    def rollout_policy(self, state, rng):
        return ROLLOUT_INTERVAL

    def rollout(self, state, steps, rng, discount=1.0) -> float:
        if self.rollout_noise > 0:
            noises = self.rollout_noise * rng.standard_normal(steps)
        else:
            noises = np.zeros(steps)
        return k_rollout(
            state[0], state[1], state[2], state[3], noises, discount, self.dt, self.substeps,
            self._others, self._merge, self._p, self._w, self.motion.tau, self.motion.length, self.motion.v_cap,
        )

    def search(self, cfg: SearchConfig, seed: int) -> SearchResult:
        """Compiled equivalent of ``mcts.search`` on this model.

        Randomness comes from numba's generator seeded with ``seed``, so the
        draws differ from the Python engine; with no rollout noise and
        ``epsilon`` in {0, 1} the two engines agree exactly.
        """
        lo = np.array([a.lo for a in self._actions], dtype=np.float64)
        hi = np.array([a.hi for a in self._actions], dtype=np.float64)
        e = self.world.ego
        q, n, count = k_search(
            e.y, e.vy, e.ay, lo, hi, int(cfg.budget), int(cfg.depth), cfg.c_uct * cfg.reward_scale,
            cfg.epsilon, cfg.discount, self.rollout_noise, int(seed) % (2**32),
            self.dt, self.substeps, self._others, self._merge, self._p, self._w,
            self.motion.tau, self.motion.length, self.motion.v_cap,
        )
        return SearchResult(actions=list(self._actions), q=q, n=n, root=None, nodes=int(count))

    def object_position(self, index: int, step: int) -> float:
        """Constant-velocity prediction of object ``index`` after ``step`` periods."""
        row = self._others[index]
        return float(row[0] + row[1] * step * self.dt)


def build_mdp_for_sigma_point(world: WorldState, road: RoadModel, cost: CostWeights = CostWeights(), **kwargs) -> HighwayMdp:
    return HighwayMdp(world, road, cost, **kwargs)
