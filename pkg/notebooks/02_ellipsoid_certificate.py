# %% [markdown]
# # How the ellipsoid solve certifies its answer
#
# The separation path needs a point of the body whose value of
# ``||x - y||^2 / (2 eta)`` is within ``1/d`` of the minimum. The solver keeps a
# running upper bound on that gap; we watch it shrink for a box and check the
# answer against the exact clamp projection.

# %%
import numpy as np

from convex_sampler import Box, minimize_quadratic

d = 10
eta = 1 / d**2
body = Box.cube(d)
rng = np.random.default_rng(3)
y = rng.standard_normal(d)
y *= 3 / np.linalg.norm(y)

res = minimize_quadratic(body, y, eta, record_history=True)
print("iterations", res.total_iterations, "separation calls", res.separation_calls)
print("certified gap %.4f (target %.4f)" % (res.certified_gap, 1 / d))

# %%
h = np.array(res.gap_history)
finite = h[np.isfinite(h)]
for t in np.linspace(0, finite.size - 1, 6).astype(int):
    print("step %4d  gap %.3g" % (t, finite[t]))

# %% [markdown]
# Strong convexity turns the value gap into a distance bound,
# ``||xhat - proj(y)|| <= sqrt(2 eta / d)``.

# %%
err = np.linalg.norm(res.xhat - np.clip(y, -1, 1))
print("distance to projection %.4f <= %.4f" % (err, np.sqrt(2 * eta / d)))
