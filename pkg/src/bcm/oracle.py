"""Brute-force oracles for the collapsed conditionals.

Everything here recomputes probabilities from first principles on tiny
instances: joint scores come from sequential urn products (no gamma
functions), subspace posteriors from numerical Beta integrals. The
sampler's conditionals must agree with these to tight tolerances; the
``oracle-check`` CLI command and the acceptance suite run the comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import CountTables, Dataset, FeatureSpace, Hyperparams, ModelState, rebuild_counts
from .errors import ConfigError
from . import gibbs


def _g_row(features, hyper, j, value, bit):
    """Pseudo-count row computed independently of the library's g_vector."""
    lam = hyper.pseudocount
    c = hyper.copy_strength
    vj = features.size(j)
    if not bit:
        return [lam] * vj
    if hyper.similarity == "threshold":
        nums = [float(o) for o in features.vocabularies[j]]
        return [
            lam * (1.0 + (c if (nums[value] - nums[v]) ** 2 <= hyper.epsilon else 0.0))
            for v in range(vj)
        ]
    return [lam * (1.0 + (c if v == value else 0.0)) for v in range(vj)]


def joint_log_prob(codes, assignments, subspaces, prototypes, cand, features, hyper):
    """Log joint of data and discrete state via sequential urn products.

    Marginalizes the mixture weights and outcome distributions by the
    chain rule: each cell contributes (prior mass + cells seen so far) over
    the running total. Includes the subspace and prototype priors.
    """
    n_obs, n_feat = codes.shape
    n_clu = subspaces.shape[0]
    a = hyper.alpha_per_cluster
    q = hyper.subspace_rate
    lp = 0.0
    # cluster-assignment urn, one per observation
    for i in range(n_obs):
        seen = [0] * n_clu
        for t in range(n_feat):
            s = assignments[i, t]
            lp += math.log((a + seen[s]) / (hyper.alpha + t))
            seen[s] += 1
    # outcome urn, one per cluster-feature block, cells in observation order
    for s in range(n_clu):
        for j in range(n_feat):
            g = _g_row(features, hyper, j, cand[prototypes[s], j], subspaces[s, j])
            gsum = sum(g)
            seen_v = [0] * len(g)
            t = 0
            for i in range(n_obs):
                if assignments[i, j] == s:
                    v = codes[i, j]
                    lp += math.log((g[v] + seen_v[v]) / (gsum + t))
                    seen_v[v] += 1
                    t += 1
    # subspace prior
    for s in range(n_clu):
        for j in range(n_feat):
            bit = subspaces[s, j]
            if q <= 0.0 or q >= 1.0:
                if bit != int(q):
                    return -np.inf
            else:
                lp += math.log(q) if bit else math.log(1.0 - q)
    # uniform prototype prior
    lp -= n_clu * math.log(cand.shape[0])
    return lp


def _normalized(logs):
    logs = np.asarray(logs, dtype=np.float64)
    w = np.exp(logs - logs.max())
    return w / w.sum()


def enum_cond_z(i, j, dataset, state, hyper, cand=None):
    """Assignment conditional for cell (i, j) by direct joint evaluation."""
    cand = dataset.codes if cand is None else cand
    z = state.assignments.copy()
    logs = []
    for s in range(state.n_clusters):
        z[i, j] = s
        logs.append(joint_log_prob(dataset.codes, z, state.subspaces,
                                   state.prototypes, cand, dataset.features, hyper))
    return _normalized(logs)


def enum_cond_p(s, dataset, state, hyper, cand=None):
    """Prototype conditional for cluster s by direct joint evaluation."""
    cand = dataset.codes if cand is None else cand
    p = state.prototypes.copy()
    logs = []
    for i in range(cand.shape[0]):
        p[s] = i
        logs.append(joint_log_prob(dataset.codes, state.assignments, state.subspaces,
                                   p, cand, dataset.features, hyper))
    return _normalized(logs)


def enum_cond_omega(s, j, dataset, state, hyper, cand=None) -> float:
    """Subspace-bit posterior by direct joint evaluation (urn products)."""
    cand = dataset.codes if cand is None else cand
    om = state.subspaces.copy()
    logs = []
    for bit in (0, 1):
        om[s, j] = bit
        logs.append(joint_log_prob(dataset.codes, state.assignments, om,
                                   state.prototypes, cand, dataset.features, hyper))
    w = _normalized(logs)
    return float(w[1])


def quad_cond_omega(s, j, dataset, state, hyper, cand=None) -> float:
    """Subspace-bit posterior via 1-D numerical integration (V_j = 2 only).

    Integrates the outcome distribution out of each branch numerically:
    the Beta-function ratio becomes a quotient of two quadratures, with no
    gamma functions involved.
    """
    features = dataset.features
    if features.size(j) != 2:
        raise ConfigError("the quadrature oracle requires a two-outcome feature")
    cand = dataset.codes if cand is None else cand
    q = hyper.subspace_rate
    if q <= 0.0:
        return 0.0
    if q >= 1.0:
        return 1.0
    n0 = n1 = 0
    for i in range(dataset.n_observations):
        if state.assignments[i, j] == s:
            if dataset.codes[i, j] == 0:
                n0 += 1
            else:
                n1 += 1
    pv = cand[state.prototypes[s], j]

    def likelihood_ratio(bit):
        g = _g_row(features, hyper, j, pv, bit)

        def num(phi):
            return phi ** (g[0] - 1 + n0) * (1 - phi) ** (g[1] - 1 + n1)

        def den(phi):
            return phi ** (g[0] - 1) * (1 - phi) ** (g[1] - 1)

        # full_output silences the roundoff warning quad emits on the
        # integrable endpoint singularities that appear when g < 1
        top = integrate.quad(num, 0.0, 1.0, epsabs=0.0, epsrel=1e-11,
                             limit=200, full_output=1)[0]
        bot = integrate.quad(den, 0.0, 1.0, epsabs=0.0, epsrel=1e-11,
                             limit=200, full_output=1)[0]
        return top / bot

    u1 = q * likelihood_ratio(1)
    u0 = (1.0 - q) * likelihood_ratio(0)
    return u1 / (u0 + u1)


# ---------------------------------------------------------------------------
# randomized comparison harness


@dataclass
class OracleReport:
    """Maximum deviations between sampler conditionals and the oracles."""

    n_states: int
    max_rel_assignment: float
    max_rel_prototype: float
    max_abs_subspace: float
    rtol: float
    atol_subspace: float

    @property
    def passed(self) -> bool:
        return (
            self.max_rel_assignment <= self.rtol
            and self.max_rel_prototype <= self.rtol
            and self.max_abs_subspace <= self.atol_subspace
        )


def random_tiny_problem(rng, max_obs=4, max_feat=3, n_clusters=2):
    """A random small instance: dataset, hyperparameters, and a random state.

    Feature 0 always has two outcomes so the quadrature oracle applies;
    roughly a quarter of the instances use thresholded similarity.
    """
    n_obs = int(rng.integers(1, max_obs + 1))
    n_feat = int(rng.integers(1, max_feat + 1))
    sizes = [2] + [int(rng.integers(2, 4)) for _ in range(n_feat - 1)]
    threshold = bool(rng.random() < 0.25)
    features = FeatureSpace(
        names=tuple(f"f{j}" for j in range(n_feat)),
        vocabularies=tuple(tuple(str(v) for v in range(k)) for k in sizes),
    )
    hyper = Hyperparams(
        n_clusters=n_clusters,
        alpha=float(rng.uniform(0.1, 4.0)),
        subspace_rate=float(rng.uniform(0.1, 0.9)),
        pseudocount=float(rng.uniform(0.2, 2.5)),
        copy_strength=float(np.exp(rng.uniform(0.0, math.log(200.0)))) if rng.random() < 0.9 else 0.0,
        similarity="threshold" if threshold else "exact",
        epsilon=float(rng.choice([0.0, 1.0])) if threshold else 0.0,
    )
    codes = np.column_stack(
        [rng.integers(0, k, size=n_obs, dtype=np.int64) for k in sizes]
    )
    dataset = Dataset(features, codes)
    state = ModelState(
        rng.integers(0, n_clusters, size=(n_obs, n_feat), dtype=np.int64),
        rng.integers(0, n_obs, size=n_clusters, dtype=np.int64),
        rng.integers(0, 2, size=(n_clusters, n_feat), dtype=np.int64),
    )
    return dataset, hyper, state


def run_oracle_check(n_states=200, seed=0, rtol=1e-9, atol_subspace=1e-3) -> OracleReport:
    """Compare the sampler conditionals against the oracles on random states.

    For every state, every assignment cell and every cluster's prototype
    conditional are checked against joint enumeration, and every
    two-outcome subspace bit against the quadrature oracle.
    """
    rng = np.random.default_rng(seed)
    max_z = max_p = max_w = 0.0
    for _ in range(n_states):
        dataset, hyper, state = random_tiny_problem(rng)
        counts = rebuild_counts(dataset, state)
        n_obs, n_feat = dataset.codes.shape
        for i in range(n_obs):
            for j in range(n_feat):
                s0 = state.assignments[i, j]
                v = dataset.codes[i, j]
                counts.decrement(s0, i, j, v)
                mine = gibbs.cond_z(i, j, state, counts, dataset, hyper)
                ours = enum_cond_z(i, j, dataset, state, hyper)
                counts.increment(s0, i, j, v)
                max_z = max(max_z, float(np.max(np.abs(mine - ours) / ours)))
        for s in range(state.n_clusters):
            mine = gibbs.cond_p(s, state, counts, dataset, hyper)
            ours = enum_cond_p(s, dataset, state, hyper)
            max_p = max(max_p, float(np.max(np.abs(mine - ours) / ours)))
            for j in range(n_feat):
                if dataset.features.size(j) != 2:
                    continue
                mine_w = gibbs.cond_omega(s, j, state, counts, dataset, hyper)
                ours_w = quad_cond_omega(s, j, dataset, state, hyper)
                max_w = max(max_w, abs(mine_w - ours_w))
    return OracleReport(n_states, max_z, max_p, max_w, rtol, atol_subspace)
