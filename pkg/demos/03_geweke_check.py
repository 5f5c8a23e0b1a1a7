"""Joint-distribution testing of the sampler (Geweke-style).

Two ways to draw from the same joint distribution over (state, data):
directly from the generative process, or by alternating Gibbs sweeps on
the state with regeneration of the data given the state. If the sampler's
conditionals are wrong in any way, summary statistics of the two streams
drift apart; a chi-squared two-sample test quantifies the agreement.
"""

import numpy as np

from bcm.geweke import default_geweke_problem, run_geweke

features, n_obs, hyper, pool = default_geweke_problem()
print(f"configuration: {n_obs} observations x {features.n_features} features, "
      f"{hyper.n_clusters} clusters, pool of {pool.shape[0]} prototype rows")
print("drawing 4000 samples from each stream (thinned chain)...")
print()

summary = run_geweke(n_draws=4000, thin=10, seed=0)
for name in summary.p_values:
    fwd = summary.forward[name]
    suc = summary.successive[name]
    print(f"{name}:")
    print(f"  forward    mean {np.mean(fwd):.4f}  sd {np.std(fwd):.4f}")
    print(f"  successive mean {np.mean(suc):.4f}  sd {np.std(suc):.4f}")
    print(f"  two-sample p-value: {summary.p_values[name]:.4f}")
print()
print("agreement at the 5% level:", "PASS" if summary.passed() else "FAIL")
