"""Domain types shared by generation, inference, and reporting.

Data is a table of N observations by P discrete features, where feature j
has its own ordered vocabulary of V_j outcomes. A model state assigns every
observation-feature cell to one of S clusters, marks each cluster's
important features with a binary subspace row, and designates one
observation per cluster as its prototype.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError

SIMILARITY_EXACT = "exact"
SIMILARITY_THRESHOLD = "threshold"


@dataclass(frozen=True)
class FeatureSpace:
    """Ordered outcome vocabularies, one per feature.

    Outcome indices v in [0, V_j) map bijectively onto the labels of
    ``vocabularies[j]``; all model arrays store indices, labels exist only
    at the IO and reporting boundaries.
    """

    names: tuple[str, ...]
    vocabularies: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        object.__setattr__(
            self, "vocabularies", tuple(tuple(str(o) for o in v) for v in self.vocabularies)
        )
        if len(self.names) != len(self.vocabularies):
            raise DataError("feature names and vocabularies differ in length")
        if len(self.names) == 0:
            raise DataError("at least one feature is required")
        if len(set(self.names)) != len(self.names):
            raise DataError("feature names must be unique")
        for name, vocab in zip(self.names, self.vocabularies):
            if len(vocab) < 1:
                raise DataError(f"feature {name!r} has an empty vocabulary")
            if len(set(vocab)) != len(vocab):
                raise DataError(f"feature {name!r} has duplicate outcome labels")

    @property
    def n_features(self) -> int:
        return len(self.names)

    @property
    def sizes(self) -> np.ndarray:
        """Vocabulary size V_j per feature."""
        return np.array([len(v) for v in self.vocabularies], dtype=np.int64)

    def size(self, j: int) -> int:
        return len(self.vocabularies[j])

    def index_of(self, j: int, label: str) -> int:
        try:
            return self.vocabularies[j].index(str(label))
        except ValueError:
            raise DataError(
                f"outcome {label!r} is not in the vocabulary of feature {self.names[j]!r}"
            ) from None

    def numeric_outcomes(self, j: int) -> np.ndarray:
        """Outcome labels of feature j parsed as floats.

        Thresholded similarity is only defined on numeric vocabularies.
        """
        try:
            return np.array([float(o) for o in self.vocabularies[j]], dtype=np.float64)
        except ValueError:
            raise ConfigError(
                f"feature {self.names[j]!r} has non-numeric outcomes; "
                "thresholded similarity requires numeric vocabularies"
            ) from None


@dataclass
class Dataset:
    """Encoded observations over a feature space.

    ``codes[i, j]`` is the outcome index of feature j in observation i.
    ``labels`` and ``ids`` are optional per-observation strings.
    """

    features: FeatureSpace
    codes: np.ndarray
    labels: list[str] | None = None
    ids: list[str] | None = None

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int64)
        if self.codes.ndim != 2:
            raise DataError("codes must be a 2-D array of outcome indices")
        n, p = self.codes.shape
        if n < 1:
            raise DataError("a dataset needs at least one observation")
        if p != self.features.n_features:
            raise DataError(
                f"row length {p} does not match the {self.features.n_features} declared features"
            )
        sizes = self.features.sizes
        if np.any(self.codes < 0) or np.any(self.codes >= sizes[None, :]):
            bad = np.argwhere((self.codes < 0) | (self.codes >= sizes[None, :]))[0]
            raise DataError(
                f"outcome index out of range at observation {bad[0]}, "
                f"feature {self.features.names[bad[1]]!r}"
            )
        if self.labels is not None:
            self.labels = [str(x) for x in self.labels]
            if len(self.labels) != n:
                raise DataError("labels length does not match the number of observations")
        if self.ids is not None:
            self.ids = [str(x) for x in self.ids]
            if len(self.ids) != n:
                raise DataError("ids length does not match the number of observations")

    @property
    def n_observations(self) -> int:
        return self.codes.shape[0]

    @property
    def n_features(self) -> int:
        return self.codes.shape[1]

    def decode_row(self, i: int) -> list[str]:
        """Outcome labels of observation i."""
        return [
            self.features.vocabularies[j][self.codes[i, j]] for j in range(self.n_features)
        ]

    def observation_id(self, i: int) -> str:
        return self.ids[i] if self.ids is not None else str(i)


@dataclass(frozen=True)
class Hyperparams:
    """Model hyperparameters.

    n_clusters     S, fixed in advance.
    alpha          total Dirichlet mass over an observation's cluster
                   weights; each cluster receives alpha / S.
    subspace_rate  Bernoulli rate q at which a feature joins a cluster's
                   subspace.
    pseudocount    baseline Dirichlet pseudo-count per outcome (lambda).
    copy_strength  boost factor c applied to outcomes matching the
                   prototype on subspace features.
    similarity     "exact" boosts only the prototype's own outcome;
                   "threshold" boosts every numeric outcome within
                   squared distance epsilon of it.
    """

    n_clusters: int
    alpha: float = 1.0
    subspace_rate: float = 0.5
    pseudocount: float = 1.0
    copy_strength: float = 50.0
    similarity: str = SIMILARITY_EXACT
    epsilon: float = 0.0

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ConfigError("n_clusters must be at least 1")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        # endpoints are allowed so generation can force subspaces on or off
        if not 0.0 <= self.subspace_rate <= 1.0:
            raise ConfigError("subspace_rate must lie in [0, 1]")
        if not self.pseudocount > 0:
            raise ConfigError("pseudocount must be positive")
        if self.copy_strength < 0:
            raise ConfigError("copy_strength must be nonnegative")
        if self.similarity not in (SIMILARITY_EXACT, SIMILARITY_THRESHOLD):
            raise ConfigError(f"unknown similarity mode {self.similarity!r}")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be nonnegative")

    @property
    def alpha_per_cluster(self) -> float:
        return self.alpha / self.n_clusters

    def with_updates(self, **kwargs) -> "Hyperparams":
        return replace(self, **kwargs)


def outcome_match_row(features: FeatureSpace, hyper: Hyperparams, j: int, value: int) -> np.ndarray:
    """Boolean row: which outcomes of feature j count as matching ``value``.

    Exact mode matches only the outcome itself; thresholded mode matches
    every outcome within squared difference epsilon on the numeric labels.
    """
    vj = features.size(j)
    if not 0 <= value < vj:
        raise DataError(f"outcome index {value} out of range for feature {features.names[j]!r}")
    if hyper.similarity == SIMILARITY_EXACT:
        row = np.zeros(vj, dtype=np.uint8)
        row[value] = 1
        return row
    nums = features.numeric_outcomes(j)
    return ((nums - nums[value]) ** 2 <= hyper.epsilon).astype(np.uint8)


def outcome_match_matrix(features: FeatureSpace, hyper: Hyperparams, j: int) -> np.ndarray:
    """(V_j, V_j) match table; row u marks the outcomes matching outcome u."""
    if hyper.similarity == SIMILARITY_EXACT:
        return np.eye(features.size(j), dtype=np.uint8)
    nums = features.numeric_outcomes(j)
    diff = nums[:, None] - nums[None, :]
    return (diff * diff <= hyper.epsilon).astype(np.uint8)


def build_match_tables(features: FeatureSpace, hyper: Hyperparams) -> list[np.ndarray]:
    """Per-feature match tables, built once per fit."""
    return [outcome_match_matrix(features, hyper, j) for j in range(features.n_features)]


def g_vector(
    features: FeatureSpace,
    hyper: Hyperparams,
    j: int,
    prototype_value: int,
    subspace_bit: int,
) -> np.ndarray:
    """Dirichlet pseudo-count vector over the outcomes of feature j.

    Every outcome receives the baseline pseudo-count; if the feature is in
    the subspace, outcomes matching the prototype's value are boosted by
    the copy-strength factor:

        g(v) = pseudocount * (1 + copy_strength * match(prototype_value, v))
    """
    lam = hyper.pseudocount
    if not subspace_bit:
        return np.full(features.size(j), lam, dtype=np.float64)
    row = outcome_match_row(features, hyper, j, prototype_value)
    return lam * (1.0 + hyper.copy_strength * row.astype(np.float64))


@dataclass
class ModelState:
    """Discrete latent state: cell assignments, prototypes, subspaces.

    assignments[i, j]  cluster of observation i's feature j (z).
    prototypes[s]      index of the observation serving as cluster s's
                       prototype (p); always a real data row.
    subspaces[s, j]    1 if feature j is important for cluster s (omega).
    """

    assignments: np.ndarray
    prototypes: np.ndarray
    subspaces: np.ndarray

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        self.prototypes = np.asarray(self.prototypes, dtype=np.int64)
        self.subspaces = np.asarray(self.subspaces, dtype=np.int64)
        if self.assignments.ndim != 2 or self.subspaces.ndim != 2 or self.prototypes.ndim != 1:
            raise DataError("malformed model state arrays")
        s = self.prototypes.shape[0]
        if self.subspaces.shape[0] != s:
            raise DataError("prototypes and subspaces disagree on the cluster count")
        if self.subspaces.shape[1] != self.assignments.shape[1]:
            raise DataError("subspaces and assignments disagree on the feature count")
        if not np.all((self.subspaces == 0) | (self.subspaces == 1)):
            raise DataError("subspace indicators must be 0 or 1")

    @property
    def n_clusters(self) -> int:
        return self.prototypes.shape[0]

    def copy(self) -> "ModelState":
        return ModelState(
            self.assignments.copy(), self.prototypes.copy(), self.subspaces.copy()
        )

    def validate_against(self, dataset: Dataset) -> None:
        n, p = dataset.codes.shape
        if self.assignments.shape != (n, p):
            raise DataError("assignment table does not match the dataset dimensions")
        s = self.n_clusters
        if np.any(self.assignments < 0) or np.any(self.assignments >= s):
            raise DataError("cluster assignment out of range")
        if np.any(self.prototypes < 0) or np.any(self.prototypes >= n):
            raise DataError("prototype index does not point at an existing observation")


@dataclass(eq=False)
class CountTables:
    """Sufficient statistics for the collapsed conditionals.

    outcome_counts[s, j, v]   cells with assignment s and outcome v at
                              feature j (padded to the largest vocabulary).
    feature_totals[s, j]      sum of outcome_counts over v.
    observation_counts[s, i]  features of observation i assigned to s.
    """

    outcome_counts: np.ndarray
    feature_totals: np.ndarray
    observation_counts: np.ndarray

    def equals(self, other: "CountTables") -> bool:
        return (
            np.array_equal(self.outcome_counts, other.outcome_counts)
            and np.array_equal(self.feature_totals, other.feature_totals)
            and np.array_equal(self.observation_counts, other.observation_counts)
        )

    def copy(self) -> "CountTables":
        return CountTables(
            self.outcome_counts.copy(),
            self.feature_totals.copy(),
            self.observation_counts.copy(),
        )

    def decrement(self, s: int, i: int, j: int, v: int) -> None:
        self.outcome_counts[s, j, v] -= 1
        self.feature_totals[s, j] -= 1
        self.observation_counts[s, i] -= 1

    def increment(self, s: int, i: int, j: int, v: int) -> None:
        self.outcome_counts[s, j, v] += 1
        self.feature_totals[s, j] += 1
        self.observation_counts[s, i] += 1


def rebuild_counts(dataset: Dataset, state: ModelState) -> CountTables:
    """Recompute all count tables from scratch.

    The incremental updates made during sampling must agree with this at
    any time; debug runs and the test suite check exactly that.
    """
    state.validate_against(dataset)
    n, p = dataset.codes.shape
    s = state.n_clusters
    vmax = int(dataset.features.sizes.max())
    njv = np.zeros((s, p, vmax), dtype=np.int64)
    ni = np.zeros((s, n), dtype=np.int64)
    z = state.assignments
    x = dataset.codes
    cols = np.broadcast_to(np.arange(p, dtype=np.int64), (n, p))
    np.add.at(njv, (z.ravel(), cols.ravel(), x.ravel()), 1)
    rows = np.broadcast_to(np.arange(n, dtype=np.int64)[:, None], (n, p))
    np.add.at(ni, (z.ravel(), rows.ravel()), 1)
    return CountTables(njv, njv.sum(axis=2), ni)
