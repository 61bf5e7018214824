"""Road geometry, vehicle kinematic state and deterministic time stepping.

Positions follow a single convention: ``y`` is the longitudinal coordinate of
an object's rear bumper and every object is ``length`` long, so the
bumper-to-bumper gap from a follower to the object ahead is
``y_lead - y_follower - length``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple

V_CAP = 70.0
VEHICLE_LENGTH = 5.0


class ObjectKind(str, Enum):
    VEHICLE = "vehicle"
    STATIONARY = "stationary-object"


@dataclass(frozen=True)
class VehicleState:
    """Kinematic state of one road object.

    ``x``/``vx``/``ax`` are lateral, ``y``/``vy``/``ay`` longitudinal.
    """

    x: float = 0.0
    y: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    ax: float = 0.0
    ay: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "vx", "vy", "ax", "ay"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"VehicleState.{name} must be finite, got {getattr(self, name)!r}")

    def as_tuple(self) -> Tuple[float, ...]:
        return (self.x, self.y, self.vx, self.vy, self.ax, self.ay)


FIELDS = ("x", "y", "vx", "vy", "ax", "ay")


@dataclass(frozen=True)
class RoadObject:
    id: str
    state: VehicleState
    kind: ObjectKind = ObjectKind.VEHICLE
    lane: str = "main"


@dataclass(frozen=True)
class WorldState:
    """The ego vehicle plus every other object sharing the road."""

    ego: VehicleState
    others: Tuple[RoadObject, ...] = ()
    time: float = 0.0

    def __post_init__(self):
        ids = [o.id for o in self.others]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate object ids in world: {ids}")
        if "ego" in ids:
            raise ValueError("object id 'ego' is reserved for the ego vehicle")

    def get(self, object_id: str) -> VehicleState:
        if object_id == "ego":
            return self.ego
        for o in self.others:
            if o.id == object_id:
                return o.state
        raise KeyError(object_id)

    def lane_of(self, object_id: str) -> str:
        if object_id == "ego":
            return "main"
        for o in self.others:
            if o.id == object_id:
                return o.lane
        raise KeyError(object_id)

    def with_object(self, obj: RoadObject) -> "WorldState":
        others = tuple(o for o in self.others if o.id != obj.id) + (obj,)
        return replace(self, others=others)

    def without_object(self, object_id: str) -> "WorldState":
        return replace(self, others=tuple(o for o in self.others if o.id != object_id))

    def replace_state(self, object_id: str, state: VehicleState) -> "WorldState":
        if object_id == "ego":
            return replace(self, ego=state)
        others = tuple(replace(o, state=state) if o.id == object_id else o for o in self.others)
        return replace(self, others=others)


@dataclass(frozen=True)
class Lane:
    id: str
    offset: float
    width: float = 3.7

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"lane {self.id!r}: width must be > 0")


@dataclass(frozen=True)
class RoadModel:
    """Lane descriptors and an optional merge point.

    A ramp lane (``ramp_lane``) feeds into ``main_lane`` at ``merge_point``;
    an object in the ramp lane counts as being in the main lane once its
    front bumper (``y + length``) reaches the merge point.
    """

    lanes: Tuple[Lane, ...] = (Lane("main", 0.0),)
    merge_point: Optional[float] = None
    main_lane: str = "main"
    ramp_lane: Optional[str] = None

    def __post_init__(self):
        ids = {lane.id for lane in self.lanes}
        if self.main_lane not in ids:
            raise ValueError(f"main lane {self.main_lane!r} not among lanes {sorted(ids)}")
        if self.merge_point is not None:
            if self.ramp_lane is None or self.ramp_lane not in ids:
                raise ValueError("a merge point requires a ramp lane that exists in the road")

    def effective_lane(self, lane: str, y: float, length: float = VEHICLE_LENGTH) -> str:
        if self.merge_point is not None and lane == self.ramp_lane and y + length >= self.merge_point:
            return self.main_lane
        return lane

    def lane_ids(self) -> Tuple[str, ...]:
        return tuple(lane.id for lane in self.lanes)


def step_kinematics(s: VehicleState, accel: float, dt: float, v_cap: float = V_CAP) -> VehicleState:
    """Advance one object longitudinally under constant acceleration.

    Velocity is clamped to ``[0, v_cap]``; when the clamp engages part-way
    through the step the position integrates only up to the stopping (or
    capping) instant.
    """
    if not dt > 0 or not math.isfinite(dt):
        raise ValueError(f"dt must be positive and finite, got {dt!r}")
    if not math.isfinite(accel):
        raise ValueError(f"accel must be finite, got {accel!r}")
    v0 = s.vy
    v1 = v0 + accel * dt
    if v1 < 0.0:
        # stops within the step
        t_stop = -v0 / accel if accel < 0 else 0.0
        y1 = s.y + v0 * t_stop + 0.5 * accel * t_stop * t_stop
        v1 = 0.0
    elif v1 > v_cap:
        t_cap = (v_cap - v0) / accel if accel > 0 else 0.0
        y1 = s.y + v0 * t_cap + 0.5 * accel * t_cap * t_cap + v_cap * (dt - t_cap)
        v1 = v_cap
    else:
        y1 = s.y + v0 * dt + 0.5 * accel * dt * dt
    return replace(s, y=y1, vy=v1, ay=accel)


def gap_to_lead(
    world: WorldState,
    follower_id: str = "ego",
    same_lane: Optional[Iterable[str]] = None,
    length: float = VEHICLE_LENGTH,
) -> Optional[Tuple[float, float]]:
    """Bumper-to-bumper distance to the nearest same-lane object ahead.

    ``same_lane`` lists the candidate object ids (the follower itself is
    skipped); by default every object in the world is a candidate. Returns
    ``(distance, lead longitudinal velocity)`` or ``None`` when the lane ahead
    is clear.
    """
    follower = world.get(follower_id)
    if same_lane is None:
        same_lane = ["ego"] + [o.id for o in world.others]
    best: Optional[Tuple[float, float]] = None
    for oid in same_lane:
        if oid == follower_id:
            continue
        other = world.get(oid)
        if other.y <= follower.y:
            continue
        d = other.y - follower.y - length
        if best is None or d < best[0]:
            best = (d, other.vy)
    return best


def objects_in_lane(world: WorldState, road: RoadModel, lane: str) -> Sequence[str]:
    """Ids (ego included) whose effective lane is ``lane``."""
    ids = []
    if lane == road.main_lane:
        ids.append("ego")
    for o in world.others:
        if road.effective_lane(o.lane, o.state.y) == lane:
            ids.append(o.id)
    return ids
