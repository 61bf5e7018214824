"""Behavior planner: belief -> sigma points -> per-point tree search -> risk-averse choice."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .belief import BeliefState, Feasibility, generate_sigma_points
from .highway import LANE_KEEP_ACTIONS, BpAction, CostWeights, HighwayMdp, MotionParams
from .idm import DEFAULT_PARAMS, IdmParams
from .mcts import SearchConfig, TreeSearch
from .qmdp import QmdpEstimate, RiskConfig, aggregate, select_risk_averse, split_budget
from .traffic import RoadModel

PLANNER_KINDS = ("ra-qmdp", "mcts-p0", "mcts-p1", "mcts-genie", "mcts-noisy")


@dataclass(frozen=True)
class PlannerConfig:
    kind: str = "ra-qmdp"
    search: SearchConfig = SearchConfig()
    risk: RiskConfig = RiskConfig()
    w0: float = 0.5
    closeness: float = 1e-3
    substeps: int = 5
    rollout_noise: float = 0.5
    engine: str = "compiled"  # or "python"
    workers: int = 0  # threads for the per-point searches; 0 picks the CPU count

    def __post_init__(self):
        if self.kind not in PLANNER_KINDS:
            raise ValueError(f"unknown planner kind {self.kind!r}; expected one of {PLANNER_KINDS}")
        if self.engine not in ("compiled", "python"):
            raise ValueError(f"unknown search engine {self.engine!r}")
        if not -1.0 < self.w0 < 1.0:
            raise ValueError(f"w0 must lie in (-1, 1), got {self.w0}")
        if self.workers < 0:
            raise ValueError(f"workers must be >= 0, got {self.workers}")


@dataclass
class Decision:
    action: BpAction
    estimate: QmdpEstimate
    n_points: int
    root_visits: List[List[int]] = field(default_factory=list)


class BehaviorPlanner:
    def __init__(
        self,
        cfg: PlannerConfig,
        road: RoadModel,
        cost: CostWeights = CostWeights(),
        idm: IdmParams = DEFAULT_PARAMS,
        motion: MotionParams = MotionParams(),
        dt: float = 0.5,
        feasibility: Optional[Feasibility] = None,
        actions: Sequence[BpAction] = LANE_KEEP_ACTIONS,
    ):
        self.cfg = cfg
        self.road = road
        self.cost = cost
        self.idm = idm
        self.motion = motion
        self.dt = dt
        self.feasibility = feasibility
        self.actions = tuple(actions)

    def decide(self, belief: BeliefState, seed: Sequence[int]) -> Decision:
        """Pick an action for ``belief``; ``seed`` keys the search randomness."""
        cfg = self.cfg
        sp = generate_sigma_points(belief, cfg.w0, self.feasibility, cfg.closeness)
        budgets = split_budget(cfg.search.budget, len(sp))
        children = np.random.SeedSequence(list(seed)).spawn(len(sp))
        # objects a hypothesis adds have not been detected yet
        known = {o.id for o in belief.world.others}

        def run(job):
            point, budget, ss = job
            mdp = HighwayMdp(
                point.world, self.road, self.cost, self.idm, self.motion,
                dt=self.dt, substeps=cfg.substeps, rollout_noise=cfg.rollout_noise, actions=self.actions,
                unseen=tuple(o.id for o in point.world.others if o.id not in known),
            )
            scfg = SearchConfig(
                depth=cfg.search.depth, budget=budget, c_uct=cfg.search.c_uct, epsilon=cfg.search.epsilon,
                discount=cfg.search.discount, reward_scale=cfg.search.reward_scale,
            )
            if cfg.engine == "compiled":
                return mdp.search(scfg, int(ss.generate_state(1)[0]))
            return TreeSearch(mdp.initial_state(), mdp, scfg, np.random.default_rng(ss)).run()

        # every search owns its seed, so results do not depend on scheduling
        jobs = list(zip(sp.points, budgets, children))
        workers = min(len(jobs), cfg.workers or os.cpu_count() or 1)
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                found = list(pool.map(run, jobs))
        else:
            found = [run(j) for j in jobs]
        results = [(point.weight, self.actions, res.q) for point, res in zip(sp.points, found)]
        visits = [[int(x) for x in res.n] for res in found]
        est = aggregate(results)
        return Decision(select_risk_averse(est, cfg.risk), est, len(sp), visits)
