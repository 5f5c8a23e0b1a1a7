"""Joint-distribution (Geweke-style) correctness check for the sampler.

Forward draws from the generative process are compared against draws from
a chain that alternates Gibbs sweeps on the latent state with regeneration
of the data given that state. If the sampler targets the right
conditionals, summary statistics from the two streams are exchangeable;
any bookkeeping or formula bug shows up as a distribution mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2_contingency

from .core import Dataset, FeatureSpace, Hyperparams
from .errors import ConfigError
from .generate import draw_codes, draw_outcome_probs, sample_prior
from .gibbs import _PackedSampler

STATISTICS = ("subspace_density", "max_cluster_share", "prototype_copy_rate")


def _draw_statistics(codes, assignments, subspaces, prototypes, pool):
    n_cells = codes.size
    n_clu = subspaces.shape[0]
    shares = np.bincount(assignments.ravel(), minlength=n_clu) / n_cells
    copied = codes == pool[prototypes[assignments],
                          np.arange(codes.shape[1])[None, :]]
    return (
        float(subspaces.mean()),
        float(shares.max()),
        float(copied.mean()),
    )


def forward_statistics(features: FeatureSpace, n_observations: int,
                       hyper: Hyperparams, pool, n_draws: int, seed) -> dict:
    """Statistics of independent draws from the generative process."""
    rng = np.random.default_rng(seed)
    pool = np.asarray(pool, dtype=np.int64)
    rows = np.empty((n_draws, len(STATISTICS)))
    for d in range(n_draws):
        draw = sample_prior(features, n_observations, hyper, pool, rng)
        rows[d] = _draw_statistics(draw.codes, draw.assignments,
                                   draw.subspaces, draw.prototypes, pool)
    return dict(zip(STATISTICS, rows.T))


def successive_statistics(features: FeatureSpace, n_observations: int,
                          hyper: Hyperparams, pool, n_draws: int,
                          thin: int = 10, seed=0) -> dict:
    """Statistics of the alternating sweep/regenerate chain.

    Starts from a forward draw (already stationary), then repeats: one
    full Gibbs sweep of the latent state given the data, followed by a
    fresh draw of the data given the state. Every ``thin``-th cycle is
    recorded to damp autocorrelation.
    """
    if thin < 1:
        raise ConfigError("thin must be at least 1")
    rng = np.random.default_rng(seed)
    pool = np.asarray(pool, dtype=np.int64)
    draw = sample_prior(features, n_observations, hyper, pool, rng)

    dataset = Dataset(features, draw.codes)
    eng = _PackedSampler(dataset, hyper, pool, prototype_update="sample")
    eng.z[...] = draw.assignments
    eng.p[...] = draw.prototypes
    eng.omega[...] = draw.subspaces
    eng.recount()

    rows = np.empty((n_draws, len(STATISTICS)))
    for d in range(n_draws):
        for _ in range(thin):
            eng.sweep(rng)
            probs = draw_outcome_probs(features, hyper, pool, eng.omega, eng.p, rng)
            eng.set_codes(draw_codes(features, probs, eng.z, rng))
        rows[d] = _draw_statistics(eng.codes, eng.z, eng.omega, eng.p, pool)
    return dict(zip(STATISTICS, rows.T))


def two_sample_discrete_pvalue(a, b, min_expected: float = 5.0) -> float:
    """Chi-squared contingency test that two discrete samples share a law.

    Values are binned by exact value; adjacent sparse bins are merged until
    every column supports the chi-squared approximation.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    values = np.unique(np.concatenate([a, b]))
    counts = np.stack([
        np.array([(a == v).sum() for v in values]),
        np.array([(b == v).sum() for v in values]),
    ]).astype(np.float64)
    # merge the weakest column into its lighter neighbor until all are usable
    need = min_expected * counts.shape[0]
    while counts.shape[1] > 1 and counts.sum(axis=0).min() < need:
        k = int(counts.sum(axis=0).argmin())
        if k == 0:
            nb = 1
        elif k == counts.shape[1] - 1:
            nb = k - 1
        else:
            nb = k - 1 if counts[:, k - 1].sum() <= counts[:, k + 1].sum() else k + 1
        counts[:, nb] += counts[:, k]
        counts = np.delete(counts, k, axis=1)
    if counts.shape[1] < 2:
        return 1.0
    _, p_value, _, _ = chi2_contingency(counts)
    return float(p_value)


@dataclass
class GewekeSummary:
    forward: dict
    successive: dict
    p_values: dict

    def passed(self, level: float = 0.05, statistics=("subspace_density", "max_cluster_share")) -> bool:
        return all(self.p_values[s] >= level for s in statistics)


def default_geweke_problem():
    """Small fixed configuration exercising ragged vocabularies."""
    features = FeatureSpace(
        names=("a", "b", "c"),
        vocabularies=(("0", "1", "2"), ("0", "1"), ("0", "1", "2")),
    )
    hyper = Hyperparams(n_clusters=2, alpha=2.0, subspace_rate=0.4,
                        pseudocount=0.7, copy_strength=4.0)
    pool = np.array([[0, 1, 2], [2, 0, 1], [1, 1, 0], [2, 1, 2]], dtype=np.int64)
    return features, 5, hyper, pool


def run_geweke(features=None, n_observations=None, hyper=None, pool=None,
               n_draws: int = 10000, thin: int = 10, seed: int = 0) -> GewekeSummary:
    """Run both streams and test every statistic; see ``GewekeSummary``."""
    if features is None:
        features, n_observations, hyper, pool = default_geweke_problem()
    fwd = forward_statistics(features, n_observations, hyper, pool, n_draws, seed)
    suc = successive_statistics(features, n_observations, hyper, pool,
                                n_draws, thin=thin, seed=seed + 1)
    p_values = {
        name: two_sample_discrete_pvalue(fwd[name], suc[name])
        for name in STATISTICS
    }
    return GewekeSummary(fwd, suc, p_values)
