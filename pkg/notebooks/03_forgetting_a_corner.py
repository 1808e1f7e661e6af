# %% [markdown]
# # Forgetting a corner start
#
# A thousand chains start at the corner (1, 1) of the square [-1, 1]^2. At
# each step we bin the thousand current points on a 10 x 10 grid and compute a
# plug-in chi-square distance to the uniform law. Once the chains have mixed,
# the estimate sits at its bias floor (cells - 1) / chains.

# %%
import numpy as np

from convex_sampler import Box, SamplerConfig, run_chains
from convex_sampler.diagnostics import divergence_bias_floor, divergence_trend

box = Box.cube(2)
cfg = SamplerConfig(warm_start="point", start_point=np.array([1.0, 1.0]), iterations=50, seed=5)
iterates = np.array([r.samples for r in run_chains(box, cfg, 1000)])

trend = divergence_trend(iterates, box, 10)
for k in (0, 1, 2, 3, 5, 10, 50):
    print("k=%2d  chi2 estimate %.4f" % (k, trend[k]))
print("bias floor %.4f" % divergence_bias_floor(box, 10, 1000))

# %% [markdown]
# The membership-only walks reach the same stationary moment, at a different
# oracle cost per step.

# %%
from convex_sampler.sampler import chain_rng, run_walk

rng = chain_rng(9)
for walk in ("ball", "hitandrun"):
    X = run_walk(box, walk, 5000, np.zeros(2), rng)
    print(walk, "E|X|^2 %.3f (exact %.3f)" % (np.mean(np.sum(X[1000:] ** 2, axis=1)), 2 / 3))
