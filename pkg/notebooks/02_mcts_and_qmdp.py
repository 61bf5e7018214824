# %% [markdown]
# # Tree search and risk-averse aggregation
# Compiled tree search on a tabular MDP, then a variance-penalised choice over
# per-point value estimates.

# %%
import numpy as np

from raqmdp.mcts import SearchConfig, TabularMdp
from raqmdp.qmdp import RiskConfig, aggregate, select_risk_averse

# %%
# a five-state chain: moving right pays 1 at the end, staying pays 0.1 every step
n = 5
nxt = np.array([[max(s - 1, 0), min(s + 1, n - 1)] for s in range(n)])
rew = np.array([[0.1, 1.0 if s == n - 2 else 0.0] for s in range(n)])
term = np.zeros(n, dtype=bool)
term[-1] = True
mdp = TabularMdp(nxt, rew, term)
res = mdp.search(0, SearchConfig(depth=6, budget=5000, epsilon=1.0, reward_scale=1.0), seed=0)
print("Q:", np.round(res.q, 3), "visits:", res.n)

# %%
# two equally weighted hypotheses disagree about "keep"; "brake" is safe in both
acts = ("keep", "brake")
est = aggregate([(0.5, acts, [10.0, 5.0]), (0.5, acts, [0.0, 4.0])])
print("mean", est.mean, "variance", est.variance)
for alpha in (0.0, 0.01, 0.1):
    print(f"alpha={alpha:<5} picks {select_risk_averse(est, RiskConfig(alpha))}")
