"""Belief-level action values from per-sample MDP values, and risk-averse choice."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Hashable, List, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class QmdpEstimate:
    actions: Tuple[Hashable, ...]
    mean: np.ndarray  # per action
    variance: np.ndarray  # per action
    point_q: np.ndarray  # (n_points, n_actions)
    weights: np.ndarray  # (n_points,)

    def score(self, alpha: float) -> np.ndarray:
        return self.mean - alpha * self.variance


@dataclass(frozen=True)
class RiskConfig:
    alpha: float = 0.01

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha!r}")


def aggregate(results: Sequence[Tuple[float, Sequence[Hashable], Sequence[float]]]) -> QmdpEstimate:
    """Weighted mean and weighted (population) variance of Q across samples.

    Each result is ``(weight, actions, q_values)``; all samples must share the
    same action list.
    """
    if not results:
        raise ValueError("nothing to aggregate")
    actions = tuple(results[0][1])
    for _, acts, q in results:
        if tuple(acts) != actions:
            raise ValueError(f"mismatched action sets: {tuple(acts)} vs {actions}")
        if len(q) != len(actions):
            raise ValueError("Q table length does not match its action list")
    w = np.array([r[0] for r in results], dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if abs(math.fsum(w) - 1.0) > 1e-9:
        raise ValueError(f"weights sum to {math.fsum(w)}, not 1")
    q = np.array([np.asarray(r[2], dtype=float) for r in results])
    # Zero-weight samples are skipped so they cannot leak non-finite values;
    # fsum makes the result independent of sample order.
    live = w > 0
    wl, ql = w[live], q[live]
    mean = np.array([math.fsum(wl * ql[:, j]) for j in range(len(actions))])
    variance = np.array([math.fsum(wl * (ql[:, j] - mean[j]) ** 2) for j in range(len(actions))])
    return QmdpEstimate(actions, mean, np.maximum(variance, 0.0), q, w)


def select_risk_averse(est: QmdpEstimate, cfg: RiskConfig = RiskConfig()) -> Any:
    """Action maximising ``mean - alpha * variance`` (lowest index on ties)."""
    if not est.actions:
        raise ValueError("empty estimate")
    return est.actions[int(np.argmax(est.score(cfg.alpha)))]


def split_budget(total: int, n_points: int) -> List[int]:
    """Even split of the query budget; the remainder goes to the first point."""
    if n_points < 1:
        raise ValueError("need at least one sample")
    base, rem = divmod(total, n_points)
    if base < 1:
        raise ValueError(f"budget {total} too small for {n_points} samples")
    return [base + rem] + [base] * (n_points - 1)
