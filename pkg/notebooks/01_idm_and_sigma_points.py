# %% [markdown]
# # Car following and sigma points
# The IDM safe distance, one closed-loop stop behind a parked object, and the
# sigma points the planner draws from an uncertain belief.

# %%
import numpy as np

from raqmdp.belief import generate_sigma_points, reconstruct_moments
from raqmdp.idm import DEFAULT_PARAMS, idm_raw, safe_distance
from raqmdp.simulator import initial_world, ramp_merge_scenario, scenario2_belief

# %%
for v in (10.0, 20.0, 29.17):
    print(f"v={v:5.2f}  s*={safe_distance(v, 0.0):6.2f}  free-road accel={idm_raw(v, None):+.3f}")

# %%
# desired accelerations approaching a stopped object from 120 m at 25 m/s
v, gap, dt = 25.0, 120.0, 0.05
for k in range(400):
    a = max(idm_raw(v, (gap, 0.0)), -DEFAULT_PARAMS.b_max)
    v_new = max(v + a * dt, 0.0)
    gap -= 0.5 * (v + v_new) * dt
    v = v_new
# plain IDM settles short of s0 from this speed; the motion planner adds a stopping-distance bound
print(f"final speed {v:.3f} m/s, final gap {gap:.2f} m (s0 = {DEFAULT_PARAMS.s0})")

# %%
sc = ramp_merge_scenario()
b = scenario2_belief(initial_world(sc), 0.0, sc.sensor, z=0.0)
sp = generate_sigma_points(b, w0=0.5)
for p in sp.points:
    print(np.round(p.vector, 3), p.weight)
m, c = reconstruct_moments(sp)
print("mean recovered:", np.allclose(m, b.mean), " covariance recovered:", np.allclose(c, b.covariance))
