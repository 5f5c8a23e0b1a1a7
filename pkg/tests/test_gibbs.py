import math

import numpy as np
import pytest

import bcm
from bcm import oracle
from bcm.core import ModelState, rebuild_counts
from bcm.errors import ConfigError
from bcm.gibbs import (
    ChainConfig,
    collapsed_log_score,
    cond_omega,
    cond_p,
    cond_z,
    run_chain,
    sweep,
)
from conftest import random_state_for, tiny_dataset


def lbeta(v):
    return sum(math.lgamma(t) for t in v) - math.lgamma(sum(v))


class TestCondZ:
    def test_symmetric_single_cell_is_uniform(self):
        ds = bcm.Dataset(bcm.FeatureSpace(("f",), (("0", "1"),)), np.array([[0]]))
        hyper = bcm.Hyperparams(n_clusters=2, alpha=1.0)
        state = ModelState(np.array([[0]]), np.array([0, 0]), np.array([[1], [1]]))
        counts = rebuild_counts(ds, state)
        counts.decrement(0, 0, 0, 0)
        probs = cond_z(0, 0, state, counts, ds, hyper)
        assert probs.tolist() == [0.5, 0.5]

    def test_matches_enumeration_on_tiny_instances(self):
        rng = np.random.default_rng(123)
        for _ in range(25):
            ds, hyper, state = oracle.random_tiny_problem(rng)
            counts = rebuild_counts(ds, state)
            for i in range(ds.n_observations):
                for j in range(ds.n_features):
                    s0 = state.assignments[i, j]
                    counts.decrement(s0, i, j, ds.codes[i, j])
                    mine = cond_z(i, j, state, counts, ds, hyper)
                    ref = oracle.enum_cond_z(i, j, ds, state, hyper)
                    counts.increment(s0, i, j, ds.codes[i, j])
                    assert np.all(np.abs(mine - ref) <= 1e-9 * ref)

    def test_extreme_copy_strength_prefers_matching_prototype(self):
        # with c -> infinity the cluster whose prototype matches the cell on
        # an active subspace feature dominates any non-matching cluster
        fs = bcm.FeatureSpace(("f0", "f1"), (("a", "b", "c"), ("x", "y")))
        ds = bcm.Dataset(fs, np.array([[0, 1], [2, 0], [0, 0]]))
        hyper = bcm.Hyperparams(n_clusters=2, alpha=1.0, copy_strength=1e8)
        state = ModelState(
            np.array([[0, 0], [1, 1], [0, 1]]), np.array([0, 1]), np.array([[1, 0], [1, 0]])
        )
        counts = rebuild_counts(ds, state)
        counts.decrement(state.assignments[2, 0], 2, 0, ds.codes[2, 0])
        probs = cond_z(2, 0, state, counts, ds, hyper)
        counts.increment(state.assignments[2, 0], 2, 0, ds.codes[2, 0])
        assert np.all(np.isfinite(probs))
        assert probs[0] > probs[1]
        assert probs[0] > 0.99

    def test_normalizes(self):
        rng = np.random.default_rng(5)
        ds, hyper, state = oracle.random_tiny_problem(rng)
        counts = rebuild_counts(ds, state)
        counts.decrement(state.assignments[0, 0], 0, 0, ds.codes[0, 0])
        probs = cond_z(0, 0, state, counts, ds, hyper)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(probs >= 0)


class TestCondOmega:
    def test_no_data_returns_prior_rate_exactly(self):
        ds = tiny_dataset(seed=0, n_obs=3, sizes=(3, 2))
        for q in (0.1, 0.3, 0.5, 0.77):
            hyper = bcm.Hyperparams(n_clusters=2, subspace_rate=q)
            state = ModelState(
                np.ones((3, 2), dtype=np.int64),  # everything in cluster 1
                np.array([0, 1]),
                np.zeros((2, 2), dtype=np.int64),
            )
            counts = rebuild_counts(ds, state)
            assert cond_omega(0, 0, state, counts, ds, hyper) == q

    def test_concentrated_counts_favor_subspace(self):
        # ten observations agreeing with the prototype on a 3-outcome
        # feature; direct Beta-ratio evaluation gives 0.97885, which clears
        # 0.99 once twenty observations agree
        def direct(n):
            d1 = lbeta([51.0 + n, 1.0, 1.0]) - lbeta([51.0, 1.0, 1.0])
            d0 = lbeta([1.0 + n, 1.0, 1.0]) - lbeta([1.0, 1.0, 1.0])
            return 1.0 / (1.0 + math.exp(d0 - d1))

        for n, floor in ((10, 0.97), (20, 0.99)):
            fs = bcm.FeatureSpace(("f",), (("0", "1", "2"),))
            ds = bcm.Dataset(fs, np.zeros((n, 1), dtype=np.int64))
            hyper = bcm.Hyperparams(
                n_clusters=2, subspace_rate=0.5, pseudocount=1.0, copy_strength=50.0
            )
            state = ModelState(
                np.zeros((n, 1), dtype=np.int64),
                np.array([0, 0]),
                np.array([[1], [0]]),
            )
            counts = rebuild_counts(ds, state)
            got = cond_omega(0, 0, state, counts, ds, hyper)
            assert got == pytest.approx(direct(n), rel=1e-12)
            assert got >= floor

    def test_matches_urn_enumeration(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            ds, hyper, state = oracle.random_tiny_problem(rng)
            counts = rebuild_counts(ds, state)
            for s in range(state.n_clusters):
                for j in range(ds.n_features):
                    mine = cond_omega(s, j, state, counts, ds, hyper)
                    ref = oracle.enum_cond_omega(s, j, ds, state, hyper)
                    assert mine == pytest.approx(ref, rel=1e-9, abs=1e-12)

    def test_matches_quadrature(self):
        rng = np.random.default_rng(99)
        worst = 0.0
        for _ in range(25):
            ds, hyper, state = oracle.random_tiny_problem(rng)
            counts = rebuild_counts(ds, state)
            for s in range(state.n_clusters):
                for j in range(ds.n_features):
                    if ds.features.size(j) != 2:
                        continue
                    mine = cond_omega(s, j, state, counts, ds, hyper)
                    ref = oracle.quad_cond_omega(s, j, ds, state, hyper)
                    worst = max(worst, abs(mine - ref))
        assert worst <= 1e-3


class TestCondP:
    def test_cluster_without_data_is_uniform(self):
        ds = tiny_dataset(seed=2, n_obs=5, sizes=(2, 3))
        hyper = bcm.Hyperparams(n_clusters=2)
        state = ModelState(
            np.ones((5, 2), dtype=np.int64),  # cluster 0 holds nothing
            np.array([0, 1]),
            np.ones((2, 2), dtype=np.int64),
        )
        counts = rebuild_counts(ds, state)
        probs = cond_p(0, state, counts, ds, hyper)
        assert np.allclose(probs, 0.2, atol=1e-12)

    def test_inactive_subspace_is_uniform(self):
        ds = tiny_dataset(seed=3, n_obs=4, sizes=(3, 2))
        hyper = bcm.Hyperparams(n_clusters=2)
        state = random_state_for(ds, 2, seed=1)
        state.subspaces[:] = 0
        counts = rebuild_counts(ds, state)
        probs = cond_p(1, state, counts, ds, hyper)
        assert np.allclose(probs, 0.25, atol=1e-12)

    def test_matches_enumeration(self):
        rng = np.random.default_rng(31)
        for _ in range(25):
            ds, hyper, state = oracle.random_tiny_problem(rng)
            counts = rebuild_counts(ds, state)
            for s in range(state.n_clusters):
                mine = cond_p(s, state, counts, ds, hyper)
                ref = oracle.enum_cond_p(s, ds, state, hyper)
                assert np.all(np.abs(mine - ref) <= 1e-9 * ref)

    def test_planted_prototype_attains_maximum(self, smiley_fit):
        # rows identical to the planted prototype on the planted subspace
        # tie at the top; the reported maximizer must be one of them
        dataset, truth, hyper, state, counts, _ = smiley_fit
        for s in range(3):
            probs = cond_p(s, state, counts, dataset, hyper)
            best = int(np.argmax(probs))
            omega = state.subspaces[s].astype(bool)
            best_row = dataset.codes[best, omega]
            top = probs.max()
            same_signature = np.flatnonzero(
                (dataset.codes[:, omega] == best_row).all(axis=1)
            )
            assert np.all(probs[same_signature] >= top * (1 - 1e-9))


class TestSweep:
    def test_preserves_count_totals(self):
        ds = tiny_dataset(seed=4, n_obs=6, sizes=(3, 2, 2))
        hyper = bcm.Hyperparams(n_clusters=3, alpha=0.8)
        state = random_state_for(ds, 3, seed=4)
        counts = rebuild_counts(ds, state)
        sweep(state, counts, ds, hyper, np.random.default_rng(0))
        assert np.all(counts.feature_totals.sum(axis=0) == 6)
        assert counts.equals(rebuild_counts(ds, state))

    def test_deterministic_given_seed(self):
        ds = tiny_dataset(seed=5, n_obs=5, sizes=(2, 3))
        hyper = bcm.Hyperparams(n_clusters=2, alpha=0.6)
        s1 = random_state_for(ds, 2, seed=6)
        s2 = s1.copy()
        c1 = rebuild_counts(ds, s1)
        c2 = rebuild_counts(ds, s2)
        sweep(s1, c1, ds, hyper, np.random.default_rng(42))
        sweep(s2, c2, ds, hyper, np.random.default_rng(42))
        assert np.array_equal(s1.assignments, s2.assignments)
        assert np.array_equal(s1.prototypes, s2.prototypes)
        assert np.array_equal(s1.subspaces, s2.subspaces)

    @pytest.mark.parametrize("proto_update", ["sample", "argmax"])
    def test_engines_bit_identical(self, proto_update):
        rng = np.random.default_rng(2024)
        for trial in range(8):
            n_obs = int(rng.integers(3, 9))
            sizes = tuple(int(rng.integers(2, 5)) for _ in range(int(rng.integers(1, 4))))
            ds = tiny_dataset(seed=trial, n_obs=n_obs, sizes=sizes)
            hyper = bcm.Hyperparams(
                n_clusters=int(rng.integers(1, 4)),
                alpha=float(rng.uniform(0.05, 3.0)),
                subspace_rate=float(rng.uniform(0.1, 0.9)),
                pseudocount=float(rng.uniform(0.3, 2.0)),
                copy_strength=float(rng.uniform(0.0, 80.0)),
            )
            cfg = dict(iterations=15, seed=trial * 7 + 1, log_every=5,
                       prototype_update=proto_update, debug_checks=True)
            sf, tf = run_chain(ds, hyper, ChainConfig(engine="fast", **cfg))
            sr, tr = run_chain(ds, hyper, ChainConfig(engine="reference", **cfg))
            assert np.array_equal(sf.assignments, sr.assignments)
            assert np.array_equal(sf.prototypes, sr.prototypes)
            assert np.array_equal(sf.subspaces, sr.subspaces)
            assert np.array_equal(tf.log_scores, tr.log_scores)


class TestRunChain:
    def test_zero_iterations_rejected(self):
        with pytest.raises(ConfigError):
            ChainConfig(iterations=0)

    def test_more_clusters_than_observations_rejected(self):
        ds = tiny_dataset(seed=0, n_obs=2, sizes=(2,))
        hyper = bcm.Hyperparams(n_clusters=5)
        with pytest.raises(ConfigError):
            run_chain(ds, hyper, ChainConfig(iterations=1))

    def test_log_scores_always_finite(self):
        ds = tiny_dataset(seed=8, n_obs=8, sizes=(3, 2))
        hyper = bcm.Hyperparams(n_clusters=2, alpha=0.3, copy_strength=100.0)
        _, trace = run_chain(ds, hyper, ChainConfig(iterations=30, seed=1, log_every=1))
        assert len(trace) == 30
        assert np.all(np.isfinite(trace.log_scores))

    def test_identical_seeds_identical_runs(self, smiley):
        dataset, _ = smiley
        hyper = bcm.generate.SMILEY_HYPER
        cfg = ChainConfig(iterations=40, seed=11, log_every=10)
        s1, t1 = run_chain(dataset, hyper, cfg)
        s2, t2 = run_chain(dataset, hyper, cfg)
        assert np.array_equal(s1.assignments, s2.assignments)
        assert np.array_equal(t1.log_scores, t2.log_scores)

    def test_init_state_resumes(self):
        ds = tiny_dataset(seed=9, n_obs=6, sizes=(2, 2))
        hyper = bcm.Hyperparams(n_clusters=2)
        state, _ = run_chain(ds, hyper, ChainConfig(iterations=5, seed=0))
        resumed, _ = run_chain(
            ds, hyper, ChainConfig(iterations=5, seed=1, init_state=state)
        )
        assert resumed.assignments.shape == state.assignments.shape

    def test_trace_accuracy_rises_from_random_start(self, smiley):
        dataset, _ = smiley
        hyper = bcm.generate.SMILEY_HYPER
        _, trace = run_chain(
            dataset, hyper, ChainConfig(iterations=60, seed=2, log_every=1)
        )
        assert np.all(np.isfinite(trace.accuracy))
        assert trace.accuracy[-1] > trace.accuracy[0]
        assert trace.accuracy[-1] > 0.9

    def test_subspace_density_in_unit_interval(self, smiley_fit):
        _, _, _, _, _, trace = smiley_fit
        assert np.all(trace.subspace_density >= 0)
        assert np.all(trace.subspace_density <= 1)


class TestCollapsedLogScore:
    def test_invariant_under_cluster_relabeling(self):
        rng = np.random.default_rng(12)
        ds, hyper, state = oracle.random_tiny_problem(rng, n_clusters=2)
        score = collapsed_log_score(state, ds, hyper)
        flipped = ModelState(
            1 - state.assignments, state.prototypes[::-1].copy(),
            state.subspaces[::-1].copy(),
        )
        assert collapsed_log_score(flipped, ds, hyper) == pytest.approx(score, rel=1e-12)

    def test_matches_urn_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            ds, hyper, state = oracle.random_tiny_problem(rng)
            mine = collapsed_log_score(state, ds, hyper)
            ref = oracle.joint_log_prob(
                ds.codes, state.assignments, state.subspaces,
                state.prototypes, ds.codes, ds.features, hyper,
            )
            assert mine == pytest.approx(ref, abs=1e-6)

    def test_fit_beats_random_initialization(self, smiley_fit):
        dataset, _, hyper, state, _, trace = smiley_fit
        rng = np.random.default_rng(0)
        random_state = ModelState(
            rng.integers(0, 3, size=dataset.codes.shape),
            rng.integers(0, dataset.n_observations, size=3),
            rng.integers(0, 2, size=(3, 6)),
        )
        assert collapsed_log_score(state, dataset, hyper) > collapsed_log_score(
            random_state, dataset, hyper
        )

    def test_no_overflow_with_extreme_inputs(self):
        rng = np.random.default_rng(1)
        ds = bcm.Dataset(
            bcm.FeatureSpace(("g",), (("0", "1", "2"),)),
            rng.integers(0, 3, size=(10**6, 1)),
        )
        hyper = bcm.Hyperparams(n_clusters=2, copy_strength=1e8)
        state = ModelState(
            rng.integers(0, 2, size=(10**6, 1)), np.array([0, 1]), np.array([[1], [1]])
        )
        counts = rebuild_counts(ds, state)
        assert math.isfinite(collapsed_log_score(state, ds, hyper, counts=counts))
        w = cond_omega(0, 0, state, counts, ds, hyper)
        assert math.isfinite(w) and 0.0 <= w <= 1.0
