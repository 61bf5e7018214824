"""Intelligent driver model with an RSS-style safe following distance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np


@dataclass(frozen=True)
class IdmParams:
    s0: float = 2.0  # minimum jam distance [m]
    rho: float = 0.25  # response time [s]
    v_desired: float = 105 / 3.6  # [m/s]
    a_max: float = 2.0  # [m/s^2]
    b_safe: float = 4.0  # [m/s^2]
    b_max: float = 8.0  # [m/s^2]

    def __post_init__(self):
        for name in ("s0", "rho", "v_desired", "a_max", "b_safe", "b_max"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"IdmParams.{name} must be positive, got {value!r}")
        if self.b_max < self.b_safe:
            raise ValueError(f"IdmParams.b_max ({self.b_max}) must be >= b_safe ({self.b_safe})")


DEFAULT_PARAMS = IdmParams()


def safe_distance(v: float, v_lead: float, p: IdmParams = DEFAULT_PARAMS) -> float:
    """Minimum safe gap behind a lead vehicle.

    The follower reacts after ``rho`` seconds (accelerating at ``a_max`` in the
    meantime), then brakes at ``b_safe`` while the lead brakes at ``b_max``.
    The result never drops below ``s0``.
    """
    if v < 0 or v_lead < 0:
        raise ValueError(f"velocities must be nonnegative, got v={v!r}, v_lead={v_lead!r}")
    v_react = v + p.rho * p.a_max
    d = (
        v * p.rho
        + 0.5 * p.a_max * p.rho**2
        + v_react**2 / (2 * p.b_safe)
        - v_lead**2 / (2 * p.b_max)
    )
    return max(p.s0, d)


def idm_accel(
    v: float,
    gap: Optional[Tuple[float, float]],
    p: IdmParams = DEFAULT_PARAMS,
    bounds: Tuple[float, float] = (-math.inf, math.inf),
) -> float:
    """Longitudinal acceleration command.

    ``gap`` is ``(s, v_lead)`` or ``None`` for a clear lane, in which case the
    interaction term is dropped. The raw value is clamped to ``bounds`` first
    and to ``[-b_max, a_max]`` second. A nonpositive gap is a contact: the
    emergency floor ``-b_max`` is returned.
    """
    if v < 0:
        raise ValueError(f"velocity must be nonnegative, got {v!r}")
    lo, hi = bounds
    if gap is not None and gap[0] <= 0:
        return -p.b_max
    a = idm_raw(v, gap, p)
    a = min(max(a, lo), hi)
    return min(max(a, -p.b_max), p.a_max)


def idm_raw(v: float, gap: Optional[Tuple[float, float]], p: IdmParams = DEFAULT_PARAMS) -> float:
    """Unclamped IDM acceleration (gap must be positive when given)."""
    free = (v / p.v_desired) ** 4
    if gap is None:
        return p.a_max * (1.0 - free)
    s, v_lead = gap
    if s <= 0:
        raise ValueError(f"gap must be positive, got {s!r}")
    ratio = safe_distance(v, max(v_lead, 0.0), p) / s
    return p.a_max * (1.0 - free - ratio * ratio)


def stopping_distance(v: float, decel: float) -> float:
    return v * v / (2.0 * decel)


def stopping_demand(v: float, gap: float, v_lead: float, p: IdmParams = DEFAULT_PARAMS) -> float:
    """Constant acceleration that matches the lead's velocity ``s0`` behind it.

    Zero when not closing in. Inside ``s0`` while still closing, the full
    ``-b_max`` is demanded.
    """
    closing = v * v - max(v_lead, 0.0) ** 2
    if v <= v_lead or closing <= 0.0:
        return 0.0
    room = gap - p.s0
    if room <= 0.0:
        return -p.b_max
    return max(-closing / (2.0 * room), -p.b_max)


def params_array(p: IdmParams) -> np.ndarray:
    """Pack parameters for the compiled planning kernels."""
    return np.array([p.s0, p.rho, p.v_desired, p.a_max, p.b_safe, p.b_max], dtype=np.float64)
