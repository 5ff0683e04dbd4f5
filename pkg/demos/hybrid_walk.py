"""Perfect sampling of a history-modulated random walk on three letters.

The walk never stays put, so every letter is missing from some row of arcs
and a_0 = 0: the depth K is never 0 and the plain backward scan cannot start.
Steps whose uniform falls below a_1 only read the previous letter. A block of
such steps in which the trajectories from all three letters merge, followed by
steps that do not look back past the merge, gives a coalescence time.

Run: python3 demos/hybrid_walk.py
"""
import numpy as np

from perfectsim.depth import Sampler
from perfectsim.hybrid import ModifiedCoupling, graph_conditions
from perfectsim.kernels import GeneralizedWalkKernel
from perfectsim.verify import empirical_law, stationary_oracle, tv_distance, window_law

arcs = [(w, g) for w in range(3) for g in range(3) if g != w]
kernel = GeneralizedWalkKernel(3, arcs, weights=(0.15, 0.1, 0.05))
print("graph:", graph_conditions(kernel).to_json())

coupling = ModifiedCoupling(kernel)
print(f"a_0 = {coupling.a0:.3f}, a_1 = {coupling.a1:.3f}")
print("markovian kernel M:")
print(np.round(coupling.M, 4))

N = 5_000
exact = window_law(stationary_oracle(kernel), 2)
for name in ("modified", "plain"):
    sampler = Sampler(kernel, "hybrid", coupling=name)
    runs = [sampler.sample(seed, -1, 0) for seed in range(N)]
    tv = tv_distance(empirical_law(tuple(r.letters) for r in runs), exact)
    taus = np.array([r.tau_window for r in runs])
    print(f"{name:>9} coupling: TV {tv:.4f} over {N} samples, median tau {np.median(taus):.0f}, "
          f"deepest {taus.min()}")

run = Sampler(kernel, "hybrid").sample(3, 0, 29)
print("seed 3, window [0, 29]:", "".join(run.labels))
