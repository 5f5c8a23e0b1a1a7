"""The sampler's conditionals against brute-force oracles.

On tiny instances every conditional can be recomputed from first
principles: assignment and prototype conditionals by evaluating the full
joint at every candidate value (urn products, no gamma functions), and the
subspace posterior by 1-D numerical integration. This is the same harness
the `bcm oracle-check` command runs.
"""

import numpy as np

from bcm import oracle
from bcm.core import rebuild_counts
from bcm.gibbs import cond_omega, cond_p, cond_z

rng = np.random.default_rng(0)
dataset, hyper, state = oracle.random_tiny_problem(rng)
counts = rebuild_counts(dataset, state)

print(f"instance: {dataset.n_observations} observations x {dataset.n_features} features, "
      f"{state.n_clusters} clusters")
print()

i, j = 0, 0
s0 = state.assignments[i, j]
counts.decrement(s0, i, j, dataset.codes[i, j])
mine = cond_z(i, j, state, counts, dataset, hyper)
ref = oracle.enum_cond_z(i, j, dataset, state, hyper)
counts.increment(s0, i, j, dataset.codes[i, j])
print("assignment conditional for cell (0, 0):")
print("  sampler:     ", np.round(mine, 10))
print("  enumeration: ", np.round(ref, 10))
print()

mine = cond_p(0, state, counts, dataset, hyper)
ref = oracle.enum_cond_p(0, dataset, state, hyper)
print("prototype conditional for cluster 0:")
print("  sampler:     ", np.round(mine, 10))
print("  enumeration: ", np.round(ref, 10))
print()

mine = cond_omega(0, 0, state, counts, dataset, hyper)
quad = oracle.quad_cond_omega(0, 0, dataset, state, hyper)
print("subspace-bit posterior for (cluster 0, feature 0):")
print(f"  sampler:    {mine:.10f}")
print(f"  quadrature: {quad:.10f}")
print()

print("running the full randomized comparison (200 states)...")
report = oracle.run_oracle_check(n_states=200, seed=0)
print(f"  max assignment deviation: {report.max_rel_assignment:.3e} (relative)")
print(f"  max prototype deviation:  {report.max_rel_prototype:.3e} (relative)")
print(f"  max subspace deviation:   {report.max_abs_subspace:.3e} (absolute)")
print("  verdict:", "PASS" if report.passed else "FAIL")
