"""Quantitative evaluation of fitted models.

Unsupervised accuracy propagates each cluster prototype's label to the
observations it dominates; supervised accuracy trains a self-contained
linear max-margin classifier (stochastic subgradient on the hinge loss)
on the mixture-weight features. Sensitivity sweeps refit over a grid of
hyperparameter values.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Dataset, Hyperparams, ModelState
from .errors import ConfigError, DataError
from .explain import estimate_pi
from .gibbs import ChainConfig, run_chain


def dominant_clusters(state: ModelState) -> np.ndarray:
    """Cluster holding the most features of each observation (ties: lowest)."""
    n_clu = state.n_clusters
    ni = np.stack([(state.assignments == s).sum(axis=1) for s in range(n_clu)])
    return ni.argmax(axis=0)


def unsupervised_accuracy(state: ModelState, dataset: Dataset) -> float:
    """Fraction of observations whose dominant cluster's prototype shares
    their label."""
    if dataset.labels is None:
        raise DataError("unsupervised accuracy needs labeled observations")
    labels = np.asarray(dataset.labels)
    dom = dominant_clusters(state)
    pred = labels[state.prototypes[dom]]
    return float((pred == labels).mean())


def best_permutation_accuracy(pred_clusters, true_labels) -> float:
    """Clustering accuracy after optimally matching clusters to classes."""
    pred = np.asarray(pred_clusters)
    truth = np.asarray(true_labels)
    classes = np.unique(truth)
    clusters = np.unique(pred)
    contingency = np.zeros((clusters.size, classes.size), dtype=np.int64)
    for a, s in enumerate(clusters):
        for b, c in enumerate(classes):
            contingency[a, b] = np.sum((pred == s) & (truth == c))
    rows, cols = linear_sum_assignment(-contingency)
    return float(contingency[rows, cols].sum() / truth.size)


def confusion_matrix(state: ModelState, dataset: Dataset):
    """Prototype-label confusion: rows are true classes, columns predicted."""
    labels = np.asarray(dataset.labels)
    classes = sorted(set(dataset.labels))
    index = {c: k for k, c in enumerate(classes)}
    dom = dominant_clusters(state)
    pred = labels[state.prototypes[dom]]
    mat = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(dataset.labels, pred):
        mat[index[t], index[p]] += 1
    return classes, mat


def cluster_purity(state: ModelState, dataset: Dataset) -> np.ndarray:
    """Largest single-class fraction within each dominant-cluster group."""
    labels = np.asarray(dataset.labels)
    dom = dominant_clusters(state)
    out = np.full(state.n_clusters, np.nan)
    for s in range(state.n_clusters):
        member = labels[dom == s]
        if member.size:
            _, counts = np.unique(member, return_counts=True)
            out[s] = counts.max() / member.size
    return out


@dataclass
class EvalReport:
    unsupervised_accuracy: float
    best_permutation_accuracy: float
    classifier_accuracy_mean: float | None
    classifier_accuracy_std: float | None
    purity: np.ndarray
    classes: list[str]
    confusion: np.ndarray


def evaluate_model(state: ModelState, dataset: Dataset, hyper: Hyperparams,
                   folds: int = 5, seed: int = 0, classifier: bool = True) -> EvalReport:
    """Full evaluation of a fitted state against the dataset's labels."""
    if dataset.labels is None:
        raise DataError("evaluation needs labeled observations")
    unsup = unsupervised_accuracy(state, dataset)
    bperm = best_permutation_accuracy(dominant_clusters(state), dataset.labels)
    classes, conf = confusion_matrix(state, dataset)
    mean = std = None
    if classifier:
        pi = estimate_pi(state, hyper)
        _, mean, std = train_pi_classifier(pi, dataset.labels, folds=folds, seed=seed)
    return EvalReport(unsup, bperm, mean, std, cluster_purity(state, dataset),
                      classes, conf)


# ---------------------------------------------------------------------------
# linear max-margin classifier on mixture-weight features


@dataclass
class LinearClassifier:
    """One-vs-rest linear scorer; weights include a trailing bias column."""

    classes: list[str]
    weights: np.ndarray
    objective_trace: np.ndarray

    def decision(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        xb = np.hstack([x, np.ones((x.shape[0], 1))])
        return xb @ self.weights.T

    def predict(self, features) -> list[str]:
        scores = self.decision(features)
        return [self.classes[k] for k in scores.argmax(axis=1)]


def _hinge_objective(weights, xb, y_signed, reg):
    margins = 1.0 - y_signed * (xb @ weights)
    hinge = np.maximum(margins, 0.0).mean()
    return 0.5 * reg * float(weights @ weights) + float(hinge)


def _train_binary(xb, y_signed, reg, epochs, rng):
    """Stochastic subgradient descent on the regularized hinge loss.

    Steps decay as 1/(reg * t); the returned weights are the average of the
    iterates, whose full-data objective is also recorded once per epoch.
    """
    n, d = xb.shape
    w = np.zeros(d)
    w_avg = np.zeros(d)
    t = 0
    objective = []
    for _ in range(epochs):
        for idx in rng.permutation(n):
            t += 1
            eta = 1.0 / (reg * t)
            w *= 1.0 - eta * reg
            if y_signed[idx] * (xb[idx] @ w) < 1.0:
                w += eta * y_signed[idx] * xb[idx]
            w_avg += (w - w_avg) / t
        objective.append(_hinge_objective(w_avg, xb, y_signed, reg))
    return w_avg, np.array(objective)


def train_pi_classifier(features, labels, folds: int = 5, seed: int = 0,
                        reg: float = 1e-3, epochs: int = 60):
    """Train the one-vs-rest classifier and cross-validate it.

    Returns (classifier trained on all data, cv accuracy mean, cv std).
    Folds are stratified by label and the whole procedure is deterministic
    given the seed.
    """
    x = np.asarray(features, dtype=np.float64)
    labels = [str(v) for v in labels]
    if x.ndim != 2 or x.shape[0] != len(labels):
        raise DataError("feature matrix and labels disagree in length")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DataError("classification needs at least two classes")
    if folds < 2:
        raise ConfigError("cross-validation needs at least two folds")

    rng = np.random.default_rng(seed)
    y = np.array([classes.index(v) for v in labels])
    fold_of = np.empty(len(labels), dtype=np.int64)
    for k in range(len(classes)):
        members = rng.permutation(np.flatnonzero(y == k))
        fold_of[members] = np.arange(members.size) % folds

    def fit(train_idx):
        xb = np.hstack([x[train_idx], np.ones((train_idx.size, 1))])
        ws = []
        traces = []
        for k in range(len(classes)):
            signed = np.where(y[train_idx] == k, 1.0, -1.0)
            w, trace = _train_binary(xb, signed, reg, epochs, rng)
            ws.append(w)
            traces.append(trace)
        return LinearClassifier(classes, np.stack(ws), np.mean(traces, axis=0))

    accs = []
    for f in range(folds):
        train_idx = np.flatnonzero(fold_of != f)
        test_idx = np.flatnonzero(fold_of == f)
        if test_idx.size == 0:
            continue
        clf = fit(train_idx)
        pred = clf.predict(x[test_idx])
        accs.append(float(np.mean([p == labels[i] for p, i in zip(pred, test_idx)])))
    accs = np.array(accs)

    final = fit(np.arange(len(labels)))
    train_acc = float(np.mean([p == t for p, t in zip(final.predict(x), labels)]))
    if train_acc < accs.mean() - 0.05:
        warnings.warn(
            "training accuracy fell below cross-validated accuracy; "
            "the optimizer may not have converged",
            stacklevel=2,
        )
    return final, float(accs.mean()), float(accs.std())


# ---------------------------------------------------------------------------
# hyperparameter sensitivity


_GRID_FIELDS = {
    "q": "subspace_rate",
    "lambda": "pseudocount",
    "c": "copy_strength",
}


def sensitivity_sweep(dataset: Dataset, base_hyper: Hyperparams, grid,
                      iterations: int = 200, seed: int = 0,
                      prototype_update: str = "sample") -> list[dict]:
    """Refit once per point of the Cartesian grid, sharing the seed.

    ``grid`` maps any of "q", "lambda", "c" to a list of values. Each row
    records the grid point, the final collapsed log score, and (when
    labels exist) both accuracy measures.
    """
    unknown = set(grid) - set(_GRID_FIELDS)
    if unknown:
        raise ConfigError(f"unknown sweep parameters: {sorted(unknown)}")
    if not grid:
        raise ConfigError("empty sweep grid")
    names = sorted(grid)
    rows = []
    for values in itertools.product(*(grid[n] for n in names)):
        point = dict(zip(names, values))
        hyper = replace(base_hyper,
                        **{_GRID_FIELDS[n]: float(v) for n, v in point.items()})
        config = ChainConfig(iterations=iterations, seed=seed,
                             prototype_update=prototype_update,
                             log_every=max(1, iterations))
        state, trace = run_chain(dataset, hyper, config)
        row = {**{n: float(v) for n, v in point.items()},
               "log_score": float(trace.log_scores[-1]),
               "subspace_density": float(trace.subspace_density[-1])}
        if dataset.labels is not None:
            row["unsupervised_accuracy"] = unsupervised_accuracy(state, dataset)
            row["best_permutation_accuracy"] = best_permutation_accuracy(
                dominant_clusters(state), dataset.labels)
        rows.append(row)
    return rows
