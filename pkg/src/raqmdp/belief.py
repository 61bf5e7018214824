"""Belief over the road world and unscented sigma-point sampling.

A :class:`BeliefState` is a Gaussian over a handful of labelled continuous
dimensions of a nominal world plus a list of discrete world hypotheses.
:func:`generate_sigma_points` turns it into a small set of weighted concrete
worlds that a per-sample planner can consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .traffic import FIELDS, VEHICLE_LENGTH, RoadModel, RoadObject, WorldState

Feasibility = Callable[[WorldState], bool]
DimLabel = Tuple[str, str]  # (object id, field name)

SYM_TOL = 1e-9
PSD_TOL = 1e-9


@dataclass(frozen=True)
class Hypothesis:
    """One discrete realisation of the world.

    ``add`` objects are inserted and ``remove`` ids dropped from the nominal
    world.
    """

    label: str
    probability: float
    add: Tuple[RoadObject, ...] = ()
    remove: Tuple[str, ...] = ()

    def apply(self, world: WorldState) -> WorldState:
        for oid in self.remove:
            world = world.without_object(oid)
        for obj in self.add:
            world = world.with_object(obj)
        return world


CERTAIN = Hypothesis("certain", 1.0)


@dataclass(frozen=True)
class BeliefState:
    world: WorldState
    mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    covariance: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    labels: Tuple[DimLabel, ...] = ()
    hypotheses: Tuple[Hypothesis, ...] = (CERTAIN,)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if mean.size == 0:
            cov = np.zeros((0, 0))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        n = mean.size
        if cov.shape != (n, n):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of length {n}")
        if len(self.labels) != n:
            raise ValueError(f"{len(self.labels)} labels for {n} continuous dims")
        for oid, name in self.labels:
            if name not in FIELDS:
                raise ValueError(f"unknown state field {name!r}")
            self.world.get(oid)
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise ValueError("belief mean and covariance must be finite")
        if n and np.max(np.abs(cov - cov.T)) > SYM_TOL:
            raise ValueError("covariance is not symmetric")
        if n and np.min(np.linalg.eigvalsh(0.5 * (cov + cov.T))) < -PSD_TOL:
            raise ValueError("covariance is not positive semidefinite")
        if not self.hypotheses:
            raise ValueError("belief needs at least one hypothesis")
        probs = [h.probability for h in self.hypotheses]
        if any(not (0.0 < p <= 1.0) for p in probs):
            raise ValueError(f"hypothesis probabilities must lie in (0, 1], got {probs}")
        if abs(math.fsum(probs) - 1.0) > 1e-9:
            raise ValueError(f"hypothesis probabilities sum to {math.fsum(probs)}, not 1")

    @property
    def n_continuous(self) -> int:
        return self.mean.size


def certain(world: WorldState) -> BeliefState:
    """A belief that puts all mass on ``world``."""
    return BeliefState(world=world)


@dataclass(frozen=True)
class SigmaPoint:
    world: WorldState
    weight: float
    vector: np.ndarray
    hypothesis: str = CERTAIN.label


@dataclass(frozen=True)
class SigmaPointSet:
    points: Tuple[SigmaPoint, ...]
    w0: float
    n_s_effective: int
    labels: Tuple[DimLabel, ...] = ()

    @property
    def weights(self) -> np.ndarray:
        return np.array([p.weight for p in self.points])

    @property
    def worlds(self) -> Tuple[WorldState, ...]:
        return tuple(p.world for p in self.points)

    def __len__(self):
        return len(self.points)


def symmetric_sqrt(a: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition."""
    a = 0.5 * (a + a.T)
    lam, vec = np.linalg.eigh(a)
    lam = np.clip(lam, 0.0, None)
    return (vec * np.sqrt(lam)) @ vec.T


def set_dims(world: WorldState, labels: Sequence[DimLabel], values: np.ndarray) -> WorldState:
    for (oid, name), value in zip(labels, values):
        state = world.get(oid)
        world = world.replace_state(oid, replace(state, **{name: float(value)}))
    return world


def generate_sigma_points(
    b: BeliefState,
    w0: float = 0.5,
    feasibility: Optional[Feasibility] = None,
    closeness: float | Sequence[float] = 1e-3,
) -> SigmaPointSet:
    """Unscented sigma points of ``b``, filtered and crossed with hypotheses.

    Perturbation directions are the columns of the symmetric square root of
    ``n/(1-w0) * covariance``. A direction is dropped (both signs together)
    if its column is within ``closeness`` of zero in every dimension or if
    either signed point fails ``feasibility``. The surviving count ``m``
    replaces ``n`` in the scaling and in the weights ``(1-w0)/(2m)``.
    """
    if not -1.0 < w0 < 1.0:
        raise ValueError(f"w0 must lie in (-1, 1), got {w0!r}")
    n = b.n_continuous
    mu = b.mean
    eps = np.broadcast_to(np.asarray(closeness, dtype=float), (n,)) if n else np.zeros(0)

    def feasible(vec: np.ndarray) -> bool:
        return feasibility is None or bool(feasibility(set_dims(b.world, b.labels, vec)))

    if not feasible(mu):
        raise ValueError("the belief mean itself is infeasible; cannot plan")

    keep = list(range(n))
    root = symmetric_sqrt(b.covariance) if n else np.zeros((0, 0))
    # Dropping directions rescales the survivors, which can change their
    # feasibility, so iterate to a fixed point.
    while keep:
        scale = math.sqrt(len(keep) / (1.0 - w0))
        survivors = []
        for i in keep:
            col = scale * root[:, i]
            if np.all(np.abs(col) <= eps):
                continue
            if not (feasible(mu + col) and feasible(mu - col)):
                continue
            survivors.append(i)
        if survivors == keep:
            break
        keep = survivors

    m = len(keep)
    if m == 0:
        continuous = [(mu.copy(), 1.0)]
    else:
        scale = math.sqrt(m / (1.0 - w0))
        wi = (1.0 - w0) / (2 * m)
        continuous = [(mu.copy(), w0)]
        for i in keep:
            continuous.append((mu + scale * root[:, i], wi))
        for i in keep:
            continuous.append((mu - scale * root[:, i], wi))

    points = []
    for vec, wc in continuous:
        base = set_dims(b.world, b.labels, vec)
        for h in b.hypotheses:
            points.append(SigmaPoint(h.apply(base), wc * h.probability, vec, h.label))
    return SigmaPointSet(tuple(points), w0=w0 if m else 1.0, n_s_effective=m, labels=b.labels)


def reconstruct_moments(sp: SigmaPointSet) -> Tuple[np.ndarray, np.ndarray]:
    """Weighted mean and covariance of the continuous sample vectors."""
    w = sp.weights
    x = np.array([p.vector for p in sp.points]).reshape(len(sp.points), -1)
    mean = w @ x
    d = x - mean
    cov = (d * w[:, None]).T @ d
    return mean, cov


def default_feasibility(
    road: RoadModel,
    v_max: float = 70.0,
    accel_limit: float = 8.0,
    length: float = VEHICLE_LENGTH,
) -> Feasibility:
    """On-road, non-overlapping, within velocity and acceleration limits."""
    lanes = {lane.id: lane for lane in road.lanes}

    def on_lane(x: float, lane_id: str) -> bool:
        lane = lanes.get(lane_id)
        return lane is not None and abs(x - lane.offset) <= lane.width / 2

    def check(world: WorldState) -> bool:
        entries = [("ego", world.ego, road.main_lane)] + [(o.id, o.state, o.lane) for o in world.others]
        for _, s, lane in entries:
            if not on_lane(s.x, lane):
                return False
            if not (0.0 <= s.vy <= v_max) or abs(s.ay) > accel_limit:
                return False
        placed = [(road.effective_lane(lane, s.y), s.y) for _, s, lane in entries]
        for i in range(len(placed)):
            for j in range(i + 1, len(placed)):
                if placed[i][0] == placed[j][0] and abs(placed[i][1] - placed[j][1]) < length:
                    return False
        return True

    return check
