import math

import numpy as np
import pytest

from oracles import GOAL, grid_q_values, grid_tables, uct_score
from raqmdp.highway import HighwayMdp
from raqmdp.mcts import (
    MDP,
    NodeStats,
    SearchConfig,
    TabularMdp,
    TreeSearch,
    least_visited,
    search,
    select_action_root,
    select_action_uct,
)
from raqmdp.traffic import ObjectKind, RoadModel, RoadObject, VehicleState, WorldState


def stats(q, n):
    s = NodeStats(len(q))
    s.q, s.n, s.visits = list(q), list(n), sum(n)
    return s


class Constant(MDP):
    def __init__(self, r, n_actions=1):
        self.r, self.n = r, n_actions

    def actions(self, s):
        return list(range(self.n))

    def transition(self, s, a):
        return s + 1

    def reward(self, s, a, n):
        return self.r

    def rollout_policy(self, s, rng):
        return 0


class PatienceMdp(MDP):
    """Action 0 pays 1 once; action 1 pays nothing now, then 1 every later step."""

    def actions(self, s):
        return [0, 1]

    def transition(self, s, a):
        t, mode = s
        return (t + 1, a if mode is None else mode)

    def reward(self, s, a, n):
        t, mode = s
        if mode is None:
            return 1.0 if a == 0 else 0.0
        return 1.0 if mode == 1 else 0.0

    def rollout_policy(self, s, rng):
        return int(rng.integers(2))


class Arms(MDP):
    """Four steady arms and one arm whose return hinges on the rollout draws."""

    def actions(self, s):
        return range(5)

    def transition(self, s, a):
        return ("arm", a, 0) if s == "root" else (s[0], s[1], s[2] + 1)

    def reward(self, s, a, n):
        if s == "root":
            return 0.0
        if s[1] < 4:
            return 1.0
        return 0.5 if a == 0 else -6.0

    def rollout_policy(self, s, rng):
        return int(rng.integers(5))


class Wide(MDP):
    """Ten actions, unbounded depth, distinct states: the tree never saturates."""

    def actions(self, s):
        return range(10)

    def transition(self, s, a):
        return s + (a,)

    def reward(self, s, a, n):
        return math.sin(len(s) + 3 * a)

    def rollout_policy(self, s, rng):
        return int(rng.integers(10))


# --- selection rules -----------------------------------------------------------


def test_uct_example_prefers_less_visited_action():
    s = stats([1.0, 0.5], [10, 2])
    assert uct_score(1.0, 12, 10, 1.0) == pytest.approx(1.498, abs=1e-3)
    assert uct_score(0.5, 12, 2, 1.0) == pytest.approx(1.615, abs=1e-3)
    assert select_action_uct(s, 1.0) == 1


def test_unvisited_action_first():
    assert select_action_uct(stats([0.0, 0.0], [1, 0]), 1.0) == 1
    assert select_action_uct(stats([5.0, 0.0, 0.0], [3, 0, 0]), 1.0) == 1


def test_zero_exploration_is_argmax_with_low_index_ties():
    assert select_action_uct(stats([1.0, 3.0, 2.0], [100, 1, 1]), 0.0) == 1
    assert select_action_uct(stats([2.0, 2.0], [1, 5]), 0.0) == 0


def test_uct_agrees_with_oracle_on_random_stats():
    rng = np.random.default_rng(0)
    for _ in range(500):
        k = int(rng.integers(2, 6))
        q = rng.normal(size=k)
        n = rng.integers(1, 50, size=k)
        c = float(rng.uniform(0, 3))
        scores = [uct_score(q[i], n.sum(), n[i], c) for i in range(k)]
        assert select_action_uct(stats(q, n), c) == int(np.argmax(scores))


def test_least_visited_and_empty_actions():
    assert least_visited(stats([0, 0, 0], [3, 1, 1])) == 1
    with pytest.raises(ValueError):
        NodeStats(0)


def test_root_epsilon_zero_is_uct_and_draws_nothing():
    rng = np.random.default_rng(3)
    before = rng.bit_generator.state
    s = stats([1.0, 0.5, 0.2], [10, 2, 1])
    assert select_action_root(s, 1.0, 0.0, rng) == select_action_uct(s, 1.0)
    assert rng.bit_generator.state == before


def test_root_epsilon_one_is_round_robin():
    rng = np.random.default_rng(3)
    s = NodeStats(5)
    for _ in range(23):
        a = select_action_root(s, 1.0, 1.0, rng)
        s.update(a, 0.0)
        assert max(s.n) - min(s.n) <= 1


# --- search --------------------------------------------------------------------


def test_depth_one_single_action_returns_reward_exactly():
    res = search(0, Constant(2.5), SearchConfig(depth=1, budget=50), np.random.default_rng(0))
    assert res.q.tolist() == [2.5] and res.n.tolist() == [50]


def test_patience_beats_greed():
    cfg = SearchConfig(depth=15, budget=3000, epsilon=0.0, reward_scale=10.0)
    res = search((0, None), PatienceMdp(), cfg, np.random.default_rng(0))
    assert res.q[0] == pytest.approx(1.0)
    assert res.q[1] == pytest.approx(14.0)
    assert res.best() == 1


def test_backup_adds_one_visit_and_one_node():
    ts = TreeSearch((), Wide(), SearchConfig(depth=30, budget=1, epsilon=0.5), np.random.default_rng(1))
    for k in range(1, 400):
        nodes = ts.nodes
        assert ts.simulate()
        assert ts.root.stats.visits == k
        assert ts.nodes == nodes + 1


def test_internal_counts_are_consistent_and_q_is_mean_of_returns():
    ts = TreeSearch((0, None), PatienceMdp(), SearchConfig(depth=8, budget=1, epsilon=0.3), np.random.default_rng(2), record=True)
    for _ in range(2000):
        ts.simulate()
    stack = [ts.root]
    checked = 0
    while stack:
        node = stack.pop()
        if node.stats is None:
            continue
        assert node.stats.visits == sum(node.stats.n)
        for a, rets in enumerate(node.returns):
            assert len(rets) == node.stats.n[a]
            if rets:
                assert node.stats.q[a] == pytest.approx(math.fsum(rets) / len(rets), abs=1e-12)
                checked += 1
        stack.extend(node.children.values())
    assert checked > 50


def test_root_visits_balanced_with_full_epsilon():
    res = search("root", Arms(), SearchConfig(depth=4, budget=1003, epsilon=1.0), np.random.default_rng(0))
    assert res.n.min() >= 1003 // 5 and res.n.max() - res.n.min() <= 1


def test_half_epsilon_keeps_every_root_action_visited():
    index, nxt, rew, term = grid_tables()
    mdp = TabularMdp(nxt, rew, term)
    cfg = SearchConfig(depth=15, budget=20_000, epsilon=0.5, reward_scale=10.0, discount=0.95)
    for seed in range(30):
        res = mdp.search(index[(0, 0)], cfg, seed)
        assert res.n.min() >= 2000


def test_full_epsilon_reduces_spread_of_low_value_estimate():
    def spread(eps):
        cfg = SearchConfig(depth=4, budget=1000, epsilon=eps, reward_scale=3.0)
        qs = [search("root", Arms(), cfg, np.random.default_rng(s)).q for s in range(30)]
        qs = np.array(qs)
        low = int(np.argmin(qs.mean(axis=0)))
        return low, qs[:, low].std()

    low1, s1 = spread(1.0)
    low0, s0 = spread(0.0)
    assert low1 == low0 == 4
    assert s1 < s0


def test_seeded_search_is_deterministic():
    cfg = SearchConfig(depth=6, budget=500, epsilon=0.5)
    a = search("root", Arms(), cfg, np.random.default_rng(9))
    b = search("root", Arms(), cfg, np.random.default_rng(9))
    assert np.array_equal(a.q, b.q) and np.array_equal(a.n, b.n)


def test_terminal_root_rejected():
    class Done(Constant):
        def is_terminal(self, s):
            return True

    with pytest.raises(ValueError, match="terminal"):
        search(0, Done(1.0), SearchConfig(budget=5), np.random.default_rng(0))


@pytest.mark.parametrize(
    "kwargs",
    [dict(depth=0), dict(budget=0), dict(epsilon=1.5), dict(c_uct=-1.0), dict(discount=0.0), dict(reward_scale=0.0)],
)
def test_search_config_validation(kwargs):
    with pytest.raises(ValueError):
        SearchConfig(**kwargs)


# --- grid world against the value-iteration oracle ------------------------------


def test_grid_oracle_sanity():
    q = grid_q_values(15, 0.95)
    # next to the goal the best move steps onto it
    assert int(np.argmax(q[(3, 4)])) == 2
    assert q[(3, 4)].max() == pytest.approx(10.0)
    assert (1, 1) not in q and GOAL not in q


def test_python_search_finds_optimal_first_move_on_grid():
    q = grid_q_values(15, 0.95)
    index, nxt, rew, term = grid_tables()
    mdp = TabularMdp(nxt, rew, term)
    cfg = SearchConfig(depth=15, budget=5000, epsilon=1.0, reward_scale=10.0, discount=0.95)
    for cell in [(0, 0), (4, 0), (2, 2), (3, 4)]:
        res = search(index[cell], mdp, cfg, np.random.default_rng(0))
        assert q[cell][int(np.argmax(res.q))] == pytest.approx(q[cell].max())


@pytest.mark.parametrize("eps", [0.0, 1.0])
def test_compiled_tabular_engine_matches_python(eps):
    index, nxt, rew, term = grid_tables()
    mdp = TabularMdp(nxt, rew, term, rollout_action=1)
    cfg = SearchConfig(depth=15, budget=3000, epsilon=eps, reward_scale=10.0, discount=0.95)
    a = mdp.search(index[(0, 0)], cfg, seed=1)
    b = search(index[(0, 0)], mdp, cfg, np.random.default_rng(0))
    assert np.array_equal(a.n, b.n)
    assert np.array_equal(a.q, b.q)


def test_tabular_validation():
    with pytest.raises(ValueError, match="shapes"):
        TabularMdp(np.zeros((3, 2)), np.zeros((3, 3)), np.zeros(3, bool))
    with pytest.raises(ValueError, match="index"):
        TabularMdp(np.full((3, 2), 3), np.zeros((3, 2)), np.zeros(3, bool))
    with pytest.raises(ValueError, match="rollout_action"):
        TabularMdp(np.zeros((3, 2)), np.zeros((3, 2)), np.zeros(3, bool), rollout_action=2)


@pytest.mark.parametrize("eps", [0.0, 1.0])
def test_compiled_highway_engine_matches_python(eps):
    world = WorldState(
        ego=VehicleState(vy=29.0),
        others=(RoadObject("box", VehicleState(y=150.0), ObjectKind.STATIONARY),),
    )
    mdp = HighwayMdp(world, RoadModel(), rollout_noise=0.0)
    cfg = SearchConfig(depth=8, budget=600, epsilon=eps)
    a = mdp.search(cfg, seed=5)
    b = search(mdp.initial_state(), mdp, cfg, np.random.default_rng(0))
    assert np.array_equal(a.n, b.n)
    assert np.allclose(a.q, b.q, rtol=0, atol=1e-9)
