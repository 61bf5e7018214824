# %% [markdown]
# # Closed-loop scenarios
# One episode per planner on the limited-range stationary object and the
# noisy ramp merge. Uses a reduced search budget so it runs in about a minute.

# %%
from raqmdp.mcts import SearchConfig
from raqmdp.planner import PlannerConfig
from raqmdp.simulator import ramp_merge_scenario, run_episode, stationary_object_scenario

FAST = SearchConfig(budget=4000)

# %%
sc = stationary_object_scenario(60.0)
for kind in ("mcts-p0", "mcts-p1", "ra-qmdp"):
    s = run_episode(sc, PlannerConfig(kind=kind, search=FAST), seed=0).summary
    print(f"{kind:9s} avg v {s['avg_velocity']:.2f}  max |jerk| {s['max_abs_jerk']:.1f}  min gap {s['min_gap']:.2f}  crash {s['crash']}")

# %%
sc = ramp_merge_scenario()
for kind in ("mcts-genie", "mcts-noisy", "ra-qmdp"):
    s = run_episode(sc, PlannerConfig(kind=kind, search=FAST), seed=15).summary
    print(f"{kind:10s} headway at merge {s['merge']['time_headway']:.2f} s  crash {s['crash']}")
