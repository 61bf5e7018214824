"""Online MDP planner: Monte Carlo tree search with an epsilon-greedy root.

Transitions are deterministic, so every (node, action) edge owns exactly one
child. Below the root actions are picked by UCT; at the root, with
probability ``epsilon`` the least-visited action is taken instead, which
keeps every root action's value estimate well sampled.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable, List, Optional, Sequence

import numpy as np
from numba import njit


class MDP(ABC):
    """Deterministic planning model consumed by :func:`search`."""

    @abstractmethod
    def actions(self, state) -> Sequence[Hashable]:
        ...

    @abstractmethod
    def transition(self, state, action):
        ...

    @abstractmethod
    def reward(self, state, action, next_state) -> float:
        ...

    def is_terminal(self, state) -> bool:
        return False

    @abstractmethod
    def rollout_policy(self, state, rng: np.random.Generator):
        ...

    def rollout(self, state, steps: int, rng: np.random.Generator, discount: float = 1.0) -> float:
        """Discounted return of following the rollout policy for ``steps``."""
        total, g = 0.0, 1.0
        for _ in range(steps):
            if self.is_terminal(state):
                break
            a = self.rollout_policy(state, rng)
            nxt = self.transition(state, a)
            total += g * self.reward(state, a, nxt)
            g *= discount
            state = nxt
        return total


@dataclass(frozen=True)
class SearchConfig:
    depth: int = 15
    budget: int = 20_000
    c_uct: float = 1.0
    epsilon: float = 1.0
    discount: float = 1.0
    reward_scale: float = 1.0  # exploration constant is c_uct * reward_scale

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.c_uct < 0:
            raise ValueError(f"c_uct must be >= 0, got {self.c_uct}")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError(f"discount must lie in (0, 1], got {self.discount}")
        if not self.reward_scale > 0:
            raise ValueError(f"reward_scale must be > 0, got {self.reward_scale}")


class NodeStats:
    """Visit counts and running-mean action values of one tree node."""

    __slots__ = ("visits", "n", "q")

    def __init__(self, n_actions: int):
        if n_actions < 1:
            raise ValueError("a node needs at least one action")
        self.visits = 0
        self.n = [0] * n_actions
        self.q = [0.0] * n_actions

    def update(self, a: int, ret: float) -> None:
        self.visits += 1
        self.n[a] += 1
        self.q[a] += (ret - self.q[a]) / self.n[a]


def select_action_uct(stats: NodeStats, c: float) -> int:
    """Index maximising ``Q + c sqrt(ln N / N_a)``; unvisited actions first."""
    n = stats.n
    if not n:
        raise ValueError("empty action set")
    if 0 in n:
        return n.index(0)
    log_n = math.log(stats.visits)
    sqrt = math.sqrt
    vals = [q + c * sqrt(log_n / count) for q, count in zip(stats.q, n)]
    # list.index returns the first maximiser, i.e. the lowest index on ties
    return vals.index(max(vals))


def least_visited(stats: NodeStats) -> int:
    n = stats.n
    if not n:
        raise ValueError("empty action set")
    return n.index(min(n))


def select_action_root(stats: NodeStats, c: float, epsilon: float, rng: np.random.Generator) -> int:
    """UCT with probability ``1 - epsilon``, least-visited action otherwise.

    No random number is drawn when ``epsilon`` is exactly 0 or 1.
    """
    if epsilon <= 0.0:
        return select_action_uct(stats, c)
    if epsilon >= 1.0 or rng.random() < epsilon:
        return least_visited(stats)
    return select_action_uct(stats, c)


class Node:
    __slots__ = ("state", "actions", "stats", "children", "reward", "terminal", "returns")

    def __init__(self, state, actions, reward: float, terminal: bool):
        self.state = state
        self.actions = actions
        self.stats = NodeStats(len(actions)) if actions else None
        self.children: Dict[int, Node] = {}
        self.reward = reward  # reward collected on the edge leading here
        self.terminal = terminal
        self.returns: Optional[List[List[float]]] = None


@dataclass
class SearchResult:
    actions: List[Any]
    q: np.ndarray
    n: np.ndarray
    root: Node = field(repr=False)
    nodes: int = 0

    def best(self) -> Any:
        return self.actions[int(np.argmax(self.q))]


class TreeSearch:
    """Incremental search state; :func:`search` is the one-shot wrapper."""

    def __init__(self, root_state, mdp: MDP, cfg: SearchConfig, rng: np.random.Generator, record: bool = False):
        self.mdp = mdp
        self.cfg = cfg
        self.rng = rng
        self.record = record
        self.c = cfg.c_uct * cfg.reward_scale
        self.root = self._make_node(root_state, 0.0)
        if self.root.terminal or not self.root.actions:
            raise ValueError("cannot search from a terminal or action-less root")
        self.nodes = 1

    def _make_node(self, state, reward: float) -> Node:
        terminal = self.mdp.is_terminal(state)
        actions = [] if terminal else list(self.mdp.actions(state))
        node = Node(state, actions, reward, terminal or not actions)
        if self.record and actions:
            node.returns = [[] for _ in actions]
        return node

    def simulate(self) -> bool:
        """Run one simulation; returns whether a new node was expanded."""
        mdp, cfg = self.mdp, self.cfg
        node = self.root
        path = []
        depth = 0
        leaf_value = 0.0
        expanded = False
        while not node.terminal and depth < cfg.depth:
            if depth == 0:
                a = select_action_root(node.stats, self.c, cfg.epsilon, self.rng)
            else:
                a = select_action_uct(node.stats, self.c)
            child = node.children.get(a)
            if child is None:
                action = node.actions[a]
                nxt = mdp.transition(node.state, action)
                child = self._make_node(nxt, mdp.reward(node.state, action, nxt))
                node.children[a] = child
                self.nodes += 1
                expanded = True
                path.append((node, a))
                remaining = cfg.depth - depth - 1
                if remaining > 0 and not child.terminal:
                    leaf_value = mdp.rollout(nxt, remaining, self.rng, cfg.discount)
                break
            path.append((node, a))
            node = child
            depth += 1
        g = leaf_value
        for parent, a in reversed(path):
            g = parent.children[a].reward + cfg.discount * g
            parent.stats.update(a, g)
            if parent.returns is not None:
                parent.returns[a].append(g)
        return expanded

    def run(self, budget: Optional[int] = None) -> SearchResult:
        for _ in range(self.cfg.budget if budget is None else budget):
            self.simulate()
        return self.result()

    def result(self) -> SearchResult:
        st = self.root.stats
        return SearchResult(
            actions=list(self.root.actions),
            q=np.array(st.q, dtype=float),
            n=np.array(st.n, dtype=int),
            root=self.root,
            nodes=self.nodes,
        )


def search(root_state, mdp: MDP, cfg: SearchConfig, rng: np.random.Generator) -> SearchResult:
    """Plan from ``root_state``; returns root Q and visit counts per action."""
    return TreeSearch(root_state, mdp, cfg, rng).run()


# --- finite MDPs -------------------------------------------------------------------


class TabularMdp(MDP):
    """Finite deterministic MDP given as tables over integer states and actions.

    ``next_state[s, a]`` and ``reward[s, a]`` describe transitions and
    ``terminal[s]`` flags absorbing states. Rollouts draw actions uniformly,
    or always take ``rollout_action`` when it is given.
    """

    def __init__(self, next_state, reward, terminal, rollout_action: Optional[int] = None):
        self.next_state = np.ascontiguousarray(next_state, dtype=np.int64)
        self.reward_table = np.ascontiguousarray(reward, dtype=np.float64)
        self.terminal = np.ascontiguousarray(terminal, dtype=np.bool_)
        n_s, n_a = self.next_state.shape
        if self.reward_table.shape != (n_s, n_a) or self.terminal.shape != (n_s,):
            raise ValueError("table shapes disagree")
        if n_a < 1 or self.next_state.min() < 0 or self.next_state.max() >= n_s:
            raise ValueError("next_state entries must index states")
        if rollout_action is not None and not 0 <= rollout_action < n_a:
            raise ValueError(f"rollout_action {rollout_action} out of range")
        self.rollout_action = rollout_action
        self._actions = tuple(range(n_a))

    def actions(self, state):
        return self._actions

    def transition(self, state, action):
        return int(self.next_state[state, action])

    def reward(self, state, action, next_state) -> float:
        return float(self.reward_table[state, action])

    def is_terminal(self, state) -> bool:
        return bool(self.terminal[state])

    def rollout_policy(self, state, rng):
        if self.rollout_action is not None:
            return self.rollout_action
        return int(rng.integers(len(self._actions)))

    def search(self, state: int, cfg: SearchConfig, seed: int) -> SearchResult:
        """Compiled equivalent of :func:`search` on this table.

        Randomness comes from numba's generator, so draws differ from the
        Python engine; with a fixed rollout action and ``epsilon`` in {0, 1}
        both engines produce identical results.
        """
        if self.is_terminal(state):
            raise ValueError("cannot search from a terminal or action-less root")
        fixed = -1 if self.rollout_action is None else int(self.rollout_action)
        q, n, count = _k_search_tabular(
            int(state), self.next_state, self.reward_table, self.terminal, fixed,
            int(cfg.budget), int(cfg.depth), cfg.c_uct * cfg.reward_scale, cfg.epsilon, cfg.discount,
            int(seed) % (2**32),
        )
        return SearchResult(actions=list(self._actions), q=q, n=n, root=None, nodes=int(count))


@njit(cache=True, nogil=True)
def _k_search_tabular(s0, nxt, rew, term, fixed, budget, depth, c, epsilon, discount, seed):
    np.random.seed(seed)
    n_act = nxt.shape[1]
    cap = budget + 1
    nstate = np.empty(cap, dtype=np.int64)
    nreward = np.zeros(cap)
    child = -np.ones((cap, n_act), dtype=np.int64)
    visits = np.zeros(cap, dtype=np.int64)
    nsa = np.zeros((cap, n_act), dtype=np.int64)
    qsa = np.zeros((cap, n_act))
    nstate[0] = s0
    count = 1
    path_node = np.empty(depth, dtype=np.int64)
    path_act = np.empty(depth, dtype=np.int64)
    for _ in range(budget):
        node = 0
        d = 0
        plen = 0
        leaf = 0.0
        while (not term[nstate[node]]) and d < depth:
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
                s = nstate[node]
                sn = nxt[s, a_idx]
                ch = count
                count += 1
                nstate[ch] = sn
                nreward[ch] = rew[s, a_idx]
                child[node, a_idx] = ch
                remaining = depth - d - 1
                if remaining > 0 and not term[sn]:
                    g = 1.0
                    st = sn
                    for _k in range(remaining):
                        if term[st]:
                            break
                        ra = fixed if fixed >= 0 else np.random.randint(0, n_act)
                        leaf += g * rew[st, ra]
                        g *= discount
                        st = nxt[st, ra]
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
