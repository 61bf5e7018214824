"""Independent reference computations used by the tests.

Nothing here imports the package under test.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Tuple

import numpy as np

# --- 5x5 grid world -------------------------------------------------------------

GRID = 5
MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))  # up, right, down, left
WALLS = frozenset({(1, 1), (1, 2), (3, 2), (3, 3)})
GOAL = (4, 4)
PIT = (2, 3)
STEP_REWARD = -1.0
GOAL_REWARD = 10.0
PIT_REWARD = -10.0


def grid_cells() -> List[Tuple[int, int]]:
    return [(r, c) for r in range(GRID) for c in range(GRID) if (r, c) not in WALLS]


def grid_step(cell: Tuple[int, int], a: int) -> Tuple[Tuple[int, int], float, bool]:
    """Deterministic move; bumping into a wall or the border stays put."""
    r, c = cell
    dr, dc = MOVES[a]
    nr, nc = r + dr, c + dc
    if not (0 <= nr < GRID and 0 <= nc < GRID) or (nr, nc) in WALLS:
        nr, nc = r, c
    nxt = (nr, nc)
    if nxt == GOAL:
        return nxt, GOAL_REWARD, True
    if nxt == PIT:
        return nxt, PIT_REWARD, True
    return nxt, STEP_REWARD, False


def grid_q_values(horizon: int, gamma: float) -> Dict[Tuple[int, int], np.ndarray]:
    """Finite-horizon optimal Q(s, a) for every non-terminal cell by backward induction."""
    cells = grid_cells()
    v = {s: 0.0 for s in cells}
    q: Dict[Tuple[int, int], np.ndarray] = {}
    for _ in range(horizon):
        q = {}
        for s in cells:
            if s in (GOAL, PIT):
                continue
            vals = []
            for a in range(4):
                nxt, r, done = grid_step(s, a)
                vals.append(r + (0.0 if done else gamma * v[nxt]))
            q[s] = np.array(vals)
        v = {s: (float(q[s].max()) if s in q else 0.0) for s in cells}
    return q


def grid_tables():
    """Transition, reward and terminal tables over all 25 cells (walls are absorbing)."""
    cells = [(r, c) for r in range(GRID) for c in range(GRID)]
    index = {c: i for i, c in enumerate(cells)}
    nxt = np.zeros((len(cells), 4), dtype=int)
    rew = np.zeros((len(cells), 4))
    term = np.zeros(len(cells), dtype=bool)
    for c in cells:
        i = index[c]
        term[i] = c in (GOAL, PIT) or c in WALLS
        for a in range(4):
            if c in WALLS:
                nxt[i, a] = i
                continue
            n, r, _ = grid_step(c, a)
            nxt[i, a], rew[i, a] = index[n], r
    return index, nxt, rew, term


# --- closed-form formulas ---------------------------------------------------------


def safe_distance_exact(v, v_lead, s0=2, rho=Fraction(1, 4), a_max=2, b_safe=4, b_max=8) -> Fraction:
    """Rational-arithmetic evaluation of the RSS-style safe distance."""
    v, v_lead = Fraction(v), Fraction(v_lead)
    d = v * rho + Fraction(1, 2) * a_max * rho**2 + (v + rho * a_max) ** 2 / (2 * b_safe) - v_lead**2 / (2 * b_max)
    return max(Fraction(s0), d)


def constant_accel(y, v, a, dt) -> Tuple[float, float]:
    return y + v * dt + 0.5 * a * dt * dt, v + a * dt


def uct_score(q, n_parent, n_edge, c):
    return q + c * np.sqrt(np.log(n_parent) / n_edge)


# --- unscented points by brute force ---------------------------------------------------


def sigma_points_reference(mu: np.ndarray, cov: np.ndarray, w0: float):
    """Sigma points via an explicit eigen-square-root built column by column."""
    n = len(mu)
    lam, vec = np.linalg.eigh(cov)
    lam = np.clip(lam, 0, None)
    root = np.zeros((n, n))
    for k in range(n):
        root += np.sqrt(lam[k]) * np.outer(vec[:, k], vec[:, k])
    scaled = np.sqrt(n / (1 - w0)) * root
    pts = [mu] + [mu + scaled[:, i] for i in range(n)] + [mu - scaled[:, i] for i in range(n)]
    w = [w0] + [(1 - w0) / (2 * n)] * (2 * n)
    return np.array(pts), np.array(w)


def weighted_moments(values: List[float], weights: List[float]) -> Tuple[float, float]:
    """Mean and population variance with exact rational arithmetic."""
    fv = [Fraction(x) for x in values]
    fw = [Fraction(x) for x in weights]
    m = sum(w * x for w, x in zip(fw, fv))
    var = sum(w * (x - m) ** 2 for w, x in zip(fw, fv))
    return float(m), float(var)
