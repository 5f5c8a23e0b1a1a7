"""Forward sampling from the generative process.

Used for synthetic datasets with planted structure (the smiley preset)
and for joint-distribution testing of the sampler. Prototypes are drawn
from an explicit candidate pool so that generation is well defined before
any data exists; fitting on real data uses the data itself as the pool.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, FeatureSpace, Hyperparams, g_vector
from .errors import ConfigError

SMILEY_FEATURES = FeatureSpace(
    names=("eye_type", "eye_shape", "eye_color",
           "mouth_type", "mouth_shape", "mouth_color"),
    vocabularies=(
        ("dot", "ring", "star"),
        ("round", "narrow", "wide"),
        ("black", "blue", "green"),
        ("smile", "frown", "open"),
        ("thin", "full", "curvy"),
        ("red", "orange", "purple"),
    ),
)

# Three planted clusters, each defined by exactly two important features.
# The pairs are disjoint, so every feature is the marker of at most one
# cluster and the other clusters can stay diffuse on it without colliding.
SMILEY_SUBSPACES = np.array(
    [
        [1, 0, 1, 0, 0, 0],  # eye_type + eye_color
        [0, 0, 0, 1, 0, 1],  # mouth_type + mouth_color
        [0, 1, 0, 0, 1, 0],  # eye_shape + mouth_shape
    ],
    dtype=np.int64,
)

SMILEY_HYPER = Hyperparams(
    n_clusters=3, alpha=0.1, subspace_rate=0.5, pseudocount=1.0, copy_strength=50.0
)

SMILEY_N_OBSERVATIONS = 240


@dataclass
class GenerativeDraw:
    """One complete draw from the generative process.

    outcome_probs[s][j] is the outcome distribution of feature j in
    cluster s; mixture_weights[i] is observation i's distribution over
    clusters. Prototype indices refer to the candidate pool.
    """

    subspaces: np.ndarray
    prototypes: np.ndarray
    outcome_probs: list[list[np.ndarray]]
    mixture_weights: np.ndarray
    assignments: np.ndarray
    codes: np.ndarray


@dataclass
class PlantedTruth:
    """Ground truth accompanying a synthetic dataset."""

    assignments: np.ndarray
    subspaces: np.ndarray
    prototype_rows: np.ndarray
    mixture_weights: np.ndarray
    labels: list[str]


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def draw_outcome_probs(features, hyper, pool, subspaces, prototypes, rng):
    """Draw the per-cluster outcome distributions given subspaces/prototypes."""
    n_clu = subspaces.shape[0]
    probs = []
    for s in range(n_clu):
        row = []
        for j in range(features.n_features):
            g = g_vector(features, hyper, j, pool[prototypes[s], j], subspaces[s, j])
            row.append(rng.dirichlet(g))
        probs.append(row)
    return probs


def draw_codes(features, outcome_probs, assignments, rng) -> np.ndarray:
    """Draw observation cells from their assigned clusters' distributions."""
    n_obs, n_feat = assignments.shape
    codes = np.empty((n_obs, n_feat), dtype=np.int64)
    u = rng.random((n_obs, n_feat))
    for j in range(n_feat):
        table = np.stack([row[j] for row in outcome_probs])  # (S, V_j)
        cum = table.cumsum(axis=1)
        codes[:, j] = np.minimum(
            (u[:, j][:, None] >= cum[assignments[:, j]]).sum(axis=1),
            table.shape[1] - 1,
        )
    return codes


def sample_prior(features: FeatureSpace, n_observations: int, hyper: Hyperparams,
                 prototype_pool, seed) -> GenerativeDraw:
    """Draw subspaces, prototypes, mixtures, assignments, and data.

    ``prototype_pool`` is a (M, P) array of outcome indices over the same
    feature space; prototypes are drawn uniformly from its rows. The draw
    is deterministic given the seed.
    """
    pool = np.asarray(prototype_pool, dtype=np.int64)
    if pool.ndim != 2 or pool.shape[0] < 1 or pool.shape[1] != features.n_features:
        raise ConfigError("prototype pool must be a non-empty (M, P) row array")
    rng = _as_rng(seed)
    n_clu = hyper.n_clusters
    n_feat = features.n_features

    subspaces = (rng.random((n_clu, n_feat)) < hyper.subspace_rate).astype(np.int64)
    prototypes = rng.integers(0, pool.shape[0], size=n_clu, dtype=np.int64)
    outcome_probs = draw_outcome_probs(features, hyper, pool, subspaces, prototypes, rng)

    mixture = rng.dirichlet(np.full(n_clu, hyper.alpha_per_cluster), size=n_observations)
    u = rng.random((n_observations, n_feat))
    cum = mixture.cumsum(axis=1)
    assignments = np.minimum(
        (u[:, :, None] >= cum[:, None, :]).sum(axis=2), n_clu - 1
    ).astype(np.int64)
    codes = draw_codes(features, outcome_probs, assignments, rng)
    return GenerativeDraw(subspaces, prototypes, outcome_probs, mixture, assignments, codes)


def make_smiley_dataset(seed) -> tuple[Dataset, PlantedTruth]:
    """Synthetic smiley-face dataset with three planted subspace clusters.

    240 observations over six three-valued features. Each planted cluster
    has exactly two important features; prototype rows are drawn uniformly
    over the outcome space. Labels are the per-observation majority of the
    planted assignments (ties to the lowest cluster).
    """
    rng = _as_rng(seed)
    features = SMILEY_FEATURES
    hyper = SMILEY_HYPER
    n_feat = features.n_features
    n_clu = hyper.n_clusters

    pool = np.empty((n_clu, n_feat), dtype=np.int64)
    for j in range(n_feat):
        pool[:, j] = rng.integers(0, features.size(j), size=n_clu)
    subspaces = SMILEY_SUBSPACES.copy()
    # prototypes sharing an important feature must disagree on it
    for j in range(n_feat):
        used: set[int] = set()
        for s in range(n_clu):
            if not subspaces[s, j]:
                continue
            if int(pool[s, j]) in used:
                free = sorted(set(range(features.size(j))) - used)
                pool[s, j] = int(rng.choice(free))
            used.add(int(pool[s, j]))
    prototypes = np.arange(n_clu, dtype=np.int64)

    # The planted structure is meant to be identifiable ground truth, so the
    # continuous draws are conditioned on it being visible: important
    # features concentrate on the prototype's value, unimportant ones stay
    # diffuse and rarely display another cluster's defining value, and
    # memberships are decisive. Bounded rejection keeps every row a draw
    # from its prior restricted to that event.
    marker_values: list[set[int]] = [set() for _ in range(n_feat)]
    for s in range(n_clu):
        for j in range(n_feat):
            if subspaces[s, j]:
                marker_values[j].add(int(pool[s, j]))
    outcome_probs = []
    for s in range(n_clu):
        row = []
        for j in range(n_feat):
            g = g_vector(features, hyper, j, pool[s, j], subspaces[s, j])
            others = marker_values[j] - ({int(pool[s, j])} if subspaces[s, j] else set())
            for _ in range(200):
                phi = rng.dirichlet(g)
                if subspaces[s, j]:
                    if phi[pool[s, j]] >= 0.985:
                        break
                elif phi.max() <= 0.6 and all(phi[v] <= 0.1 for v in others):
                    break
            row.append(phi)
        outcome_probs.append(row)
    alpha_vec = np.full(n_clu, hyper.alpha_per_cluster)
    mixture = np.empty((SMILEY_N_OBSERVATIONS, n_clu))
    for i in range(SMILEY_N_OBSERVATIONS):
        for _ in range(200):
            mixture[i] = rng.dirichlet(alpha_vec)
            if mixture[i].max() >= 0.97:
                break
    u = rng.random((SMILEY_N_OBSERVATIONS, n_feat))
    cum = mixture.cumsum(axis=1)
    assignments = np.minimum(
        (u[:, :, None] >= cum[:, None, :]).sum(axis=2), n_clu - 1
    ).astype(np.int64)
    codes = draw_codes(features, outcome_probs, assignments, rng)

    majority = np.array(
        [np.argmax(np.bincount(row, minlength=n_clu)) for row in assignments]
    )
    labels = [str(int(s)) for s in majority]
    ids = [f"face{i:03d}" for i in range(SMILEY_N_OBSERVATIONS)]
    dataset = Dataset(features, codes, labels=labels, ids=ids)
    truth = PlantedTruth(assignments, subspaces, pool.copy(), mixture, labels)
    return dataset, truth
