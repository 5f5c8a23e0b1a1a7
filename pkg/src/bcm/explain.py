"""Human-facing artifacts of a fitted model.

Each cluster is reported as a prototype (an actual observation) plus the
subset of features that define the cluster, alongside posterior-mean
estimates of the outcome distributions and per-observation mixture
weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CountTables, Dataset, Hyperparams, ModelState, g_vector
from .errors import DataError
from .gibbs import _resolve_candidates, cond_omega, cond_p


@dataclass
class ClusterExplanation:
    cluster: int
    empty: bool
    prototype_index: int | None
    prototype_id: str | None
    prototype_row: list[str] | None
    subspace: np.ndarray
    subspace_features: list[str]
    subspace_values: list[str] | None


@dataclass
class Explanation:
    """Everything needed to present a fitted model to a person."""

    clusters: list[ClusterExplanation]
    mixture_weights: np.ndarray
    outcome_probs: list[list[np.ndarray]]
    feature_names: list[str]


def estimate_phi(state: ModelState, counts: CountTables, dataset: Dataset,
                 hyper: Hyperparams, candidates=None) -> list[list[np.ndarray]]:
    """Posterior-mean outcome distributions, indexed [cluster][feature].

    Each row is (pseudo-counts + observed counts) normalized; recovering
    the within-cluster outcome distributions amounts to counting.
    """
    cand = _resolve_candidates(dataset, candidates)
    features = dataset.features
    out = []
    for s in range(state.n_clusters):
        row = []
        for j in range(features.n_features):
            g = g_vector(features, hyper, j, cand[state.prototypes[s], j],
                         state.subspaces[s, j])
            vj = features.size(j)
            n = counts.outcome_counts[s, j, :vj]
            row.append((g + n) / (g.sum() + counts.feature_totals[s, j]))
        out.append(row)
    return out


def estimate_pi(state: ModelState, hyper: Hyperparams) -> np.ndarray:
    """Posterior-mean mixture weights per observation, shape (N, S).

    These are the natural feature vectors for a downstream classifier.
    """
    n_clu = hyper.n_clusters
    n_feat = state.assignments.shape[1]
    ni = np.stack([(state.assignments == s).sum(axis=1) for s in range(n_clu)])
    return (hyper.alpha_per_cluster + ni.T) / (hyper.alpha + n_feat)


def extract_explanation(state: ModelState, counts: CountTables, dataset: Dataset,
                        hyper: Hyperparams, candidates=None,
                        mixture_weights=None) -> Explanation:
    """Build the cluster report from a fitted state.

    Both halves of a cluster's description are defined as maximizers, so
    reports do not depend on the chain's last sampling step: the prototype
    maximizes its conditional (lowest index on ties) and each subspace bit
    is on exactly when its posterior probability given the final
    assignments exceeds one half. Clusters with no assigned features are
    flagged empty and carry no prototype. ``mixture_weights`` may override
    the final-state estimate (e.g. with a chain average).
    """
    features = dataset.features
    names = list(features.names)
    cand = _resolve_candidates(dataset, candidates)
    self_candidates = candidates is None
    clusters = []
    for s in range(state.n_clusters):
        subspace = np.array(
            [
                1 if cond_omega(s, j, state, counts, dataset, hyper,
                                candidates=candidates) > 0.5 else 0
                for j in range(features.n_features)
            ],
            dtype=np.int64,
        )
        if counts.feature_totals[s].sum() == 0:
            clusters.append(ClusterExplanation(
                cluster=s, empty=True, prototype_index=None, prototype_id=None,
                prototype_row=None, subspace=subspace,
                subspace_features=[names[j] for j in np.flatnonzero(subspace)],
                subspace_values=None,
            ))
            continue
        probs = cond_p(s, state, counts, dataset, hyper, candidates=candidates)
        idx = int(np.argmax(probs))
        row = [
            features.vocabularies[j][cand[idx, j]] for j in range(features.n_features)
        ]
        active = np.flatnonzero(subspace)
        clusters.append(ClusterExplanation(
            cluster=s, empty=False, prototype_index=idx,
            prototype_id=dataset.observation_id(idx) if self_candidates else str(idx),
            prototype_row=row, subspace=subspace,
            subspace_features=[names[j] for j in active],
            subspace_values=[row[j] for j in active],
        ))
    pi = estimate_pi(state, hyper) if mixture_weights is None else np.asarray(mixture_weights)
    phi = estimate_phi(state, counts, dataset, hyper, candidates=candidates)
    return Explanation(clusters, pi, phi, names)


def explanation_to_dict(expl: Explanation) -> dict:
    """JSON-ready view of an explanation (mixture weights summarized)."""
    return {
        "feature_names": expl.feature_names,
        "clusters": [
            {
                "cluster": c.cluster,
                "empty": c.empty,
                "prototype_index": c.prototype_index,
                "prototype_id": c.prototype_id,
                "prototype": None if c.prototype_row is None else dict(
                    zip(expl.feature_names, c.prototype_row)
                ),
                "subspace": [int(b) for b in c.subspace],
                "subspace_features": c.subspace_features,
                "subspace_values": c.subspace_values,
            }
            for c in expl.clusters
        ],
        "mixture_weight_means": expl.mixture_weights.mean(axis=0).tolist(),
    }


def explanation_to_markdown(expl: Explanation) -> str:
    """One section per cluster: prototype row with its defining features."""
    lines = []
    for c in expl.clusters:
        lines.append(f"## Cluster {c.cluster}")
        lines.append("")
        if c.empty:
            lines.append("*empty: no features assigned to this cluster*")
            lines.append("")
            continue
        lines.append(f"Prototype: **{c.prototype_id}**")
        lines.append("")
        lines.append("| feature | value | defining |")
        lines.append("|---|---|---|")
        active = set(np.flatnonzero(c.subspace).tolist())
        for j, name in enumerate(expl.feature_names):
            value = c.prototype_row[j]
            if j in active:
                lines.append(f"| {name} | **{value}** | yes |")
            else:
                lines.append(f"| {name} | {value} |  |")
        lines.append("")
        if c.subspace_features:
            pairs = ", ".join(
                f"{n}={v}" for n, v in zip(c.subspace_features, c.subspace_values)
            )
            lines.append(f"Defining features: {pairs}")
        else:
            lines.append("Defining features: none")
        lines.append("")
    return "\n".join(lines)


def subspace_bitmap(subspace_row, width: int, height: int) -> str:
    """Render a subspace row over a grid layout as a text bitmap.

    For pixel data stored row-major as one feature per pixel; '#' marks
    defining pixels.
    """
    row = np.asarray(subspace_row).ravel()
    if row.size != width * height:
        raise DataError(f"subspace length {row.size} does not fill a {width}x{height} grid")
    grid = row.reshape(height, width)
    return "\n".join("".join("#" if b else "." for b in line) for line in grid)


def subspace_to_pgm(subspace_row, width: int, height: int) -> str:
    """Subspace row as a portable graymap (P2) for external image tools."""
    row = np.asarray(subspace_row).ravel()
    if row.size != width * height:
        raise DataError(f"subspace length {row.size} does not fill a {width}x{height} grid")
    grid = row.reshape(height, width)
    body = "\n".join(" ".join("255" if b else "0" for b in line) for line in grid)
    return f"P2\n{width} {height}\n255\n{body}\n"
