"""Collapsed Gibbs sampler over assignments, subspaces, and prototypes.

The per-observation cluster weights and the per-cluster outcome
distributions are integrated out analytically, so the chain moves only on
discrete variables. Two engines implement the same sweep: compiled kernels
(``engine="fast"``) and a pure-Python mirror (``engine="reference"``). Both
consume identical uniform-variate streams and must produce bit-identical
trajectories; the conditional formulas themselves are verified against
enumeration and quadrature oracles in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import (
    CountTables,
    Dataset,
    Hyperparams,
    ModelState,
    build_match_tables,
    rebuild_counts,
)
from .errors import ConfigError, DataError, NumericalError

try:  # compiled engine is optional at import time, required for engine="fast"
    from . import _kernels as _k

    HAVE_FAST_ENGINE = True
    _lgamma = _k.lgamma  # exact same libm symbol as the kernels use
except ImportError:  # pragma: no cover - exercised only without numba
    _k = None
    HAVE_FAST_ENGINE = False
    _lgamma = math.lgamma

PROTOTYPE_SAMPLE = "sample"
PROTOTYPE_ARGMAX = "argmax"


# ---------------------------------------------------------------------------
# configuration and trace containers


@dataclass
class ChainConfig:
    """Settings for one sampling run.

    prototype_update  "sample" draws each prototype from its conditional,
                      "argmax" fixes it at the maximizer (lowest index on
                      ties). Reports always use the maximizer regardless.
    """

    iterations: int
    seed: int = 0
    init_state: ModelState | None = None
    log_every: int = 10
    prototype_update: str = PROTOTYPE_SAMPLE
    engine: str = "fast"
    record_accuracy: bool = True
    record_pi_average: bool = False
    debug_checks: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be at least 1")
        if self.log_every < 1:
            raise ConfigError("log_every must be at least 1")
        if self.prototype_update not in (PROTOTYPE_SAMPLE, PROTOTYPE_ARGMAX):
            raise ConfigError(f"unknown prototype_update {self.prototype_update!r}")
        if self.engine not in ("fast", "reference"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.engine == "fast" and not HAVE_FAST_ENGINE:
            raise ConfigError("compiled engine unavailable; use engine='reference'")


@dataclass
class ChainTrace:
    """Per-logged-iteration chain diagnostics."""

    iterations: np.ndarray
    log_scores: np.ndarray
    subspace_density: np.ndarray
    prototypes: np.ndarray
    accuracy: np.ndarray
    pi_average: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.iterations)


# ---------------------------------------------------------------------------
# shared helpers


def _resolve_candidates(dataset: Dataset, candidates) -> np.ndarray:
    """Rows eligible to serve as prototypes; defaults to the data itself."""
    if candidates is None:
        return dataset.codes
    cand = np.asarray(candidates, dtype=np.int64)
    if cand.ndim != 2 or cand.shape[1] != dataset.n_features:
        raise DataError("prototype candidates must be rows over the same features")
    if cand.shape[0] < 1:
        raise DataError("prototype candidate pool is empty")
    sizes = dataset.features.sizes
    if np.any(cand < 0) or np.any(cand >= sizes[None, :]):
        raise DataError("prototype candidate outcome index out of range")
    return cand


def _match_counts(tables) -> list[np.ndarray]:
    return [t.sum(axis=1).astype(np.int64) for t in tables]


def _assignment_weights(i, j, state, counts, dataset, hyper, tables, mcounts, cand):
    """Unnormalized conditional over clusters for cell (i, j).

    Counts must exclude the cell itself. The observation-side denominator
    is cluster-independent and omitted.
    """
    lam = hyper.pseudocount
    c = hyper.copy_strength
    vj = dataset.features.size(j)
    alpha_per = hyper.alpha_per_cluster
    v = dataset.codes[i, j]
    n_clu = state.n_clusters
    w = np.empty(n_clu, dtype=np.float64)
    for s in range(n_clu):
        pv = cand[state.prototypes[s], j]
        if state.subspaces[s, j] == 1:
            gx = lam * (1.0 + c * tables[j][pv, v])
            gs = lam * (vj + c * mcounts[j][pv])
        else:
            gx = lam
            gs = lam * vj
        w[s] = (alpha_per + counts.observation_counts[s, i]) * (
            (gx + counts.outcome_counts[s, j, v]) / (gs + counts.feature_totals[s, j])
        )
    return w


def _subspace_probability(vj, total, njv_row, match_row, mc, lam, c, q):
    """Python mirror of the compiled subspace conditional."""
    if total == 0:
        return q
    if q >= 1.0:
        return 1.0
    if q <= 0.0:
        return 0.0
    d = 0.0
    for v in range(vj):
        nv = njv_row[v]
        g1 = lam * (1.0 + c * match_row[v])
        d += _lgamma(g1 + nv) - _lgamma(g1)
        d -= _lgamma(lam + nv) - _lgamma(lam)
    gs1 = lam * (vj + c * mc)
    gs0 = lam * vj
    d -= _lgamma(gs1 + total) - _lgamma(gs1)
    d += _lgamma(gs0 + total) - _lgamma(gs0)
    logit = math.log(q) - math.log(1.0 - q) + d
    # branch-stable logistic; large counts push the logit far out
    if logit >= 0.0:
        return 1.0 / (1.0 + math.exp(-logit))
    e = math.exp(logit)
    return e / (1.0 + e)


def _prototype_log_scores(s, state, counts, dataset, hyper, tables, mcounts, cand):
    """Collapsed log-likelihood of cluster s's data per prototype candidate.

    Features outside the subspace would contribute the same factor to
    every candidate and are skipped.
    """
    lam = hyper.pseudocount
    c = hyper.copy_strength
    n_cand = cand.shape[0]
    scores = np.zeros(n_cand, dtype=np.float64)
    for j in range(dataset.n_features):
        if state.subspaces[s, j] == 0:
            continue
        vj = dataset.features.size(j)
        total = counts.feature_totals[s, j]
        vbuf = np.empty(vj, dtype=np.float64)
        for u in range(vj):
            acc = 0.0
            for v in range(vj):
                gv = lam * (1.0 + c * tables[j][u, v])
                acc += _lgamma(gv + counts.outcome_counts[s, j, v]) - _lgamma(gv)
            gsum = lam * (vj + c * mcounts[j][u])
            acc -= _lgamma(gsum + total) - _lgamma(gsum)
            vbuf[u] = acc
        scores += vbuf[cand[:, j]]
    return scores


def _pick(weights, u):
    """Sample an index proportional to weights; mirrors the compiled rule."""
    total = 0.0
    for w in weights:
        total += w
    t = u * total
    acc = 0.0
    last = 0
    for k, w in enumerate(weights):
        if w > 0.0:
            last = k
        acc += w
        if t < acc:
            return k
    return last


# ---------------------------------------------------------------------------
# public conditionals


def cond_z(i, j, state, counts, dataset, hyper, candidates=None) -> np.ndarray:
    """Conditional distribution of cell (i, j)'s cluster given all else.

    ``counts`` must exclude the cell's current assignment
    (decrement-before-evaluate). Returns a normalized length-S vector.
    """
    cand = _resolve_candidates(dataset, candidates)
    tables = build_match_tables(dataset.features, hyper)
    mcounts = _match_counts(tables)
    w = _assignment_weights(i, j, state, counts, dataset, hyper, tables, mcounts, cand)
    return w / w.sum()


def cond_omega(s, j, state, counts, dataset, hyper, candidates=None) -> float:
    """Posterior probability that feature j belongs to cluster s's subspace.

    With no data assigned to (s, j) the Beta-function ratios cancel and the
    prior rate is returned exactly.
    """
    cand = _resolve_candidates(dataset, candidates)
    tables = build_match_tables(dataset.features, hyper)
    mcounts = _match_counts(tables)
    pv = cand[state.prototypes[s], j]
    return _subspace_probability(
        dataset.features.size(j),
        counts.feature_totals[s, j],
        counts.outcome_counts[s, j],
        tables[j][pv],
        mcounts[j][pv],
        hyper.pseudocount,
        hyper.copy_strength,
        hyper.subspace_rate,
    )


def cond_p(s, state, counts, dataset, hyper, candidates=None) -> np.ndarray:
    """Conditional distribution of cluster s's prototype over the candidates.

    Uniform prior over candidate rows; each candidate is scored by the
    collapsed likelihood of the cluster's assigned data with the candidate's
    outcomes as the copy targets. A cluster with no assigned features yields
    the uniform distribution.
    """
    cand = _resolve_candidates(dataset, candidates)
    tables = build_match_tables(dataset.features, hyper)
    mcounts = _match_counts(tables)
    scores = _prototype_log_scores(s, state, counts, dataset, hyper, tables, mcounts, cand)
    w = np.exp(scores - scores.max())
    return w / w.sum()


def collapsed_log_score(state, dataset, hyper, candidates=None, counts=None) -> float:
    """Log joint of data and discrete state with the mixtures integrated out.

    Invariant under relabeling the clusters (with prototype and subspace
    rows permuted accordingly).
    """
    cand = _resolve_candidates(dataset, candidates)
    if counts is None:
        counts = rebuild_counts(dataset, state)
    return _log_score_arrays(
        dataset,
        hyper,
        cand,
        state.prototypes,
        state.subspaces,
        counts.outcome_counts,
        counts.feature_totals,
        counts.observation_counts,
    )


def _log_score_arrays(dataset, hyper, cand, p, omega, njv, nj, ni) -> float:
    n_obs, n_feat = dataset.codes.shape
    n_clu = omega.shape[0]
    a = hyper.alpha_per_cluster
    lam = hyper.pseudocount
    c = hyper.copy_strength
    q = hyper.subspace_rate
    sizes = dataset.features.sizes

    z_part = (
        n_obs * (gammaln(hyper.alpha) - gammaln(hyper.alpha + n_feat))
        + gammaln(a + ni).sum()
        - n_obs * n_clu * gammaln(a)
    )

    tables = build_match_tables(dataset.features, hyper)
    vmax = njv.shape[2]
    match_pad = np.zeros((n_feat, vmax, vmax), dtype=np.float64)
    for j, t in enumerate(tables):
        vj = t.shape[0]
        match_pad[j, :vj, :vj] = t
    proto_vals = cand[p]  # (S, P)
    boost = match_pad[np.arange(n_feat)[None, :], proto_vals] * omega[:, :, None]
    g = lam * (1.0 + c * boost)  # padded entries stay at lam and cancel below
    mcount = boost.sum(axis=2)
    gsum = lam * (sizes[None, :] + c * mcount)
    x_part = float(
        (gammaln(g + njv) - gammaln(g)).sum()
        - (gammaln(gsum + nj) - gammaln(gsum)).sum()
    )

    k1 = int(omega.sum())
    k0 = n_clu * n_feat - k1
    if q <= 0.0 or q >= 1.0:
        consistent = (k1 == 0) if q <= 0.0 else (k0 == 0)
        w_part = 0.0 if consistent else -np.inf
    else:
        w_part = k1 * math.log(q) + k0 * math.log(1.0 - q)

    p_part = -n_clu * math.log(cand.shape[0])
    return float(z_part + x_part + w_part + p_part)


# ---------------------------------------------------------------------------
# reference sweep (pure Python, mirrors the compiled kernels)


def _reference_sweep(state, counts, dataset, hyper, u_z, u_w, u_p,
                     prototype_update, cand, tables, mcounts):
    n_obs, n_feat = dataset.codes.shape
    n_clu = state.n_clusters
    x = dataset.codes
    z = state.assignments
    # cluster assignments, row-major, decrement-before-evaluate
    for i in range(n_obs):
        for j in range(n_feat):
            v = x[i, j]
            counts.decrement(z[i, j], i, j, v)
            w = _assignment_weights(i, j, state, counts, dataset, hyper, tables, mcounts, cand)
            s1 = _pick(w, u_z[i, j])
            z[i, j] = s1
            counts.increment(s1, i, j, v)
    # subspace indicators
    lam, c, q = hyper.pseudocount, hyper.copy_strength, hyper.subspace_rate
    for s in range(n_clu):
        for j in range(n_feat):
            pv = cand[state.prototypes[s], j]
            p1 = _subspace_probability(
                dataset.features.size(j),
                counts.feature_totals[s, j],
                counts.outcome_counts[s, j],
                tables[j][pv],
                mcounts[j][pv],
                lam, c, q,
            )
            state.subspaces[s, j] = 1 if u_w[s, j] < p1 else 0
    # prototypes
    for s in range(n_clu):
        scores = _prototype_log_scores(s, state, counts, dataset, hyper, tables, mcounts, cand)
        if prototype_update == PROTOTYPE_SAMPLE:
            w = np.exp(scores - scores.max())
            state.prototypes[s] = _pick(w, u_p[s])
        else:
            state.prototypes[s] = int(np.argmax(scores))


def sweep(state, counts, dataset, hyper, rng, prototype_update=PROTOTYPE_SAMPLE,
          candidates=None):
    """One full Gibbs scan, updating state and counts in place.

    Every cell assignment is resampled, then every subspace indicator,
    then every prototype. This is the reference engine; ``run_chain`` with
    ``engine="fast"`` performs the identical scan in compiled code.
    """
    cand = _resolve_candidates(dataset, candidates)
    tables = build_match_tables(dataset.features, hyper)
    mcounts = _match_counts(tables)
    n_obs, n_feat = dataset.codes.shape
    n_clu = state.n_clusters
    u_z = rng.random((n_obs, n_feat))
    u_w = rng.random((n_clu, n_feat))
    u_p = rng.random(n_clu)
    _reference_sweep(state, counts, dataset, hyper, u_z, u_w, u_p,
                     prototype_update, cand, tables, mcounts)
    return state, counts


# ---------------------------------------------------------------------------
# compiled engine driver


class _PackedSampler:
    """Owns the flat arrays and scratch buffers the kernels operate on."""

    def __init__(self, dataset, hyper, cand, prototype_update):
        features = dataset.features
        self.dataset = dataset
        self.hyper = hyper
        self.codes = np.ascontiguousarray(dataset.codes, dtype=np.int64)
        self.cand = np.ascontiguousarray(cand, dtype=np.int64)
        self.vocab_sizes = features.sizes
        self.vmax = int(self.vocab_sizes.max())
        n_feat = features.n_features
        self.match = np.zeros((n_feat, self.vmax, self.vmax), dtype=np.uint8)
        self.mcount = np.zeros((n_feat, self.vmax), dtype=np.int64)
        for j, t in enumerate(build_match_tables(features, hyper)):
            vj = t.shape[0]
            self.match[j, :vj, :vj] = t
            self.mcount[j, :vj] = t.sum(axis=1)
        self.sample_prototypes = prototype_update == PROTOTYPE_SAMPLE
        n_clu = hyper.n_clusters
        n_obs = self.codes.shape[0]
        self.z = np.zeros((n_obs, n_feat), dtype=np.int64)
        self.p = np.zeros(n_clu, dtype=np.int64)
        self.omega = np.zeros((n_clu, n_feat), dtype=np.int64)
        self.njv = np.zeros((n_clu, n_feat, self.vmax), dtype=np.int64)
        self.nj = np.zeros((n_clu, n_feat), dtype=np.int64)
        self.ni = np.zeros((n_clu, n_obs), dtype=np.int64)
        self._wbuf = np.empty(n_clu, dtype=np.float64)
        self._scores = np.empty(self.cand.shape[0], dtype=np.float64)
        self._vbuf = np.empty(self.vmax, dtype=np.float64)

    def load_state(self, state: ModelState):
        self.z[...] = state.assignments
        self.p[...] = state.prototypes
        self.omega[...] = state.subspaces
        self.recount()

    def recount(self):
        self.njv[...] = 0
        self.ni[...] = 0
        n_obs, n_feat = self.codes.shape
        cols = np.broadcast_to(np.arange(n_feat, dtype=np.int64), (n_obs, n_feat))
        np.add.at(self.njv, (self.z.ravel(), cols.ravel(), self.codes.ravel()), 1)
        rows = np.broadcast_to(np.arange(n_obs, dtype=np.int64)[:, None], (n_obs, n_feat))
        np.add.at(self.ni, (self.z.ravel(), rows.ravel()), 1)
        self.nj[...] = self.njv.sum(axis=2)

    def set_codes(self, codes):
        self.codes[...] = codes
        self.recount()

    def sweep(self, rng):
        n_obs, n_feat = self.codes.shape
        n_clu = self.p.shape[0]
        u_z = rng.random((n_obs, n_feat))
        u_w = rng.random((n_clu, n_feat))
        u_p = rng.random(n_clu)
        _k.gibbs_sweep(
            self.codes, self.vocab_sizes, self.match, self.mcount, self.cand,
            self.z, self.p, self.omega, self.njv, self.nj, self.ni,
            self.hyper.alpha_per_cluster, self.hyper.pseudocount,
            self.hyper.copy_strength, self.hyper.subspace_rate,
            self.sample_prototypes, u_z, u_w, u_p,
            self._wbuf, self._scores, self._vbuf,
        )

    def verify_counts(self):
        njv, ni, nj = self.njv.copy(), self.ni.copy(), self.nj.copy()
        self.recount()
        if not (
            np.array_equal(njv, self.njv)
            and np.array_equal(ni, self.ni)
            and np.array_equal(nj, self.nj)
        ):
            raise NumericalError("incremental count tables diverged from a full recount")

    def export_state(self) -> ModelState:
        return ModelState(self.z.copy(), self.p.copy(), self.omega.copy())

    def export_counts(self) -> CountTables:
        return CountTables(self.njv.copy(), self.nj.copy(), self.ni.copy())


# ---------------------------------------------------------------------------
# chain driver


def _init_state(rng, n_obs, n_feat, n_cand, hyper) -> ModelState:
    z = rng.integers(0, hyper.n_clusters, size=(n_obs, n_feat), dtype=np.int64)
    omega = (rng.random((hyper.n_clusters, n_feat)) < hyper.subspace_rate).astype(np.int64)
    p = rng.integers(0, n_cand, size=hyper.n_clusters, dtype=np.int64)
    return ModelState(z, p, omega)


def run_chain(dataset: Dataset, hyper: Hyperparams, config: ChainConfig,
              candidates=None) -> tuple[ModelState, ChainTrace]:
    """Run a full sampling chain and return the final state plus its trace.

    Initialization draws assignments uniformly, subspace bits at the prior
    rate, and prototypes uniformly, unless ``config.init_state`` is given.
    Identical (dataset, hyper, config) produce bit-identical results.
    """
    cand = _resolve_candidates(dataset, candidates)
    n_cand = cand.shape[0]
    if hyper.n_clusters > n_cand:
        raise ConfigError(
            "more clusters than prototype candidates: every cluster needs one"
        )
    n_obs, n_feat = dataset.codes.shape
    rng = np.random.default_rng(config.seed)

    if config.init_state is not None:
        state = config.init_state.copy()
        if state.assignments.shape != (n_obs, n_feat) or state.n_clusters != hyper.n_clusters:
            raise ConfigError("init_state does not match the dataset/hyperparameter shapes")
        if np.any(state.prototypes < 0) or np.any(state.prototypes >= n_cand):
            raise ConfigError("init_state prototype index outside the candidate pool")
    else:
        state = _init_state(rng, n_obs, n_feat, n_cand, hyper)

    self_candidates = candidates is None
    labels = None
    if config.record_accuracy and self_candidates and dataset.labels is not None:
        labels = np.asarray(dataset.labels)

    logged_iters: list[int] = []
    scores: list[float] = []
    density: list[float] = []
    protos: list[np.ndarray] = []
    accuracy: list[float] = []
    pi_sum = None

    def log_row(it, p_arr, omega_arr, njv, nj, ni):
        nonlocal pi_sum
        score = _log_score_arrays(dataset, hyper, cand, p_arr, omega_arr, njv, nj, ni)
        logged_iters.append(it)
        scores.append(score)
        density.append(float(omega_arr.mean()))
        protos.append(p_arr.copy())
        if labels is not None:
            dom = ni.argmax(axis=0)
            acc = float((labels[p_arr[dom]] == labels).mean())
            accuracy.append(acc)
        else:
            accuracy.append(float("nan"))
        if config.record_pi_average:
            pi = (hyper.alpha_per_cluster + ni.T) / (hyper.alpha + n_feat)
            pi_sum = pi if pi_sum is None else pi_sum + pi

    if config.engine == "fast":
        eng = _PackedSampler(dataset, hyper, cand, config.prototype_update)
        eng.load_state(state)
        for it in range(1, config.iterations + 1):
            eng.sweep(rng)
            if config.debug_checks:
                eng.verify_counts()
            if it % config.log_every == 0 or it == config.iterations:
                log_row(it, eng.p, eng.omega, eng.njv, eng.nj, eng.ni)
        state = eng.export_state()
    else:
        counts = rebuild_counts(dataset, state)
        tables = build_match_tables(dataset.features, hyper)
        mcounts = _match_counts(tables)
        n_clu = hyper.n_clusters
        for it in range(1, config.iterations + 1):
            u_z = rng.random((n_obs, n_feat))
            u_w = rng.random((n_clu, n_feat))
            u_p = rng.random(n_clu)
            _reference_sweep(state, counts, dataset, hyper, u_z, u_w, u_p,
                             config.prototype_update, cand, tables, mcounts)
            if config.debug_checks and not counts.equals(rebuild_counts(dataset, state)):
                raise NumericalError("incremental count tables diverged from a full recount")
            if it % config.log_every == 0 or it == config.iterations:
                log_row(it, state.prototypes, state.subspaces,
                        counts.outcome_counts, counts.feature_totals,
                        counts.observation_counts)

    trace = ChainTrace(
        iterations=np.array(logged_iters, dtype=np.int64),
        log_scores=np.array(scores, dtype=np.float64),
        subspace_density=np.array(density, dtype=np.float64),
        prototypes=np.array(protos, dtype=np.int64),
        accuracy=np.array(accuracy, dtype=np.float64),
        pi_average=None if pi_sum is None else pi_sum / len(logged_iters),
    )
    return state, trace
