import numpy as np
import pytest

import bcm
from bcm.errors import ConfigError
from bcm.generate import (
    SMILEY_HYPER,
    SMILEY_N_OBSERVATIONS,
    SMILEY_SUBSPACES,
    make_smiley_dataset,
    sample_prior,
)


def small_features():
    return bcm.FeatureSpace(
        ("a", "b", "c"),
        (("0", "1", "2"), ("0", "1"), ("0", "1", "2", "3")),
    )


class TestSamplePrior:
    def test_deterministic(self):
        fs = small_features()
        hyper = bcm.Hyperparams(n_clusters=2, alpha=1.0, subspace_rate=0.5)
        pool = np.array([[0, 1, 2], [2, 0, 3]])
        d1 = sample_prior(fs, 6, hyper, pool, seed=9)
        d2 = sample_prior(fs, 6, hyper, pool, seed=9)
        assert np.array_equal(d1.codes, d2.codes)
        assert np.array_equal(d1.assignments, d2.assignments)
        assert np.array_equal(d1.subspaces, d2.subspaces)

    def test_empty_pool_rejected(self):
        fs = small_features()
        hyper = bcm.Hyperparams(n_clusters=2)
        with pytest.raises(ConfigError):
            sample_prior(fs, 4, hyper, np.zeros((0, 3)), seed=0)

    def test_probability_vectors_normalize(self):
        fs = small_features()
        hyper = bcm.Hyperparams(n_clusters=3, alpha=0.7, subspace_rate=0.4)
        pool = np.array([[0, 0, 0], [1, 1, 1], [2, 0, 2]])
        draw = sample_prior(fs, 20, hyper, pool, seed=4)
        for s in range(3):
            for j in range(3):
                row = draw.outcome_probs[s][j]
                assert row.shape == (fs.size(j),)
                assert np.all(row >= 0)
                assert row.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(draw.mixture_weights.sum(axis=1), 1.0, atol=1e-12)

    def test_no_copying_when_strength_zero(self):
        # with zero copy strength g is flat, so the prototype pool is inert:
        # two different pools under the same seed give identical draws
        fs = small_features()
        hyper = bcm.Hyperparams(n_clusters=2, copy_strength=0.0, subspace_rate=0.7)
        pool_a = np.array([[0, 0, 0], [1, 1, 1]])
        pool_b = np.array([[2, 1, 3], [0, 0, 2]])
        da = sample_prior(fs, 12, hyper, pool_a, seed=11)
        db = sample_prior(fs, 12, hyper, pool_b, seed=11)
        assert np.array_equal(da.codes, db.codes)
        assert np.array_equal(da.assignments, db.assignments)

    def test_extreme_copying_reproduces_prototypes(self):
        # Dirichlet(lam,...,lam(1+c)) mean mass at the boosted entry is
        # (1+c)/(V+c); at c=1e6 and V<=4 the copy rate clears 0.99 easily
        fs = small_features()
        hyper = bcm.Hyperparams(
            n_clusters=2, subspace_rate=1.0, copy_strength=1e6, pseudocount=1.0
        )
        pool = np.array([[0, 1, 2], [2, 0, 3]])
        draw = sample_prior(fs, 400, hyper, pool, seed=3)
        proto_vals = pool[draw.prototypes]  # (S, P)
        copied = draw.codes == proto_vals[draw.assignments,
                                          np.arange(fs.n_features)[None, :]]
        for j in range(fs.n_features):
            floor = (1 + 1e6) / (fs.size(j) + 1e6)
            assert floor > 0.99
        assert copied.mean() >= 0.99


class TestSmiley:
    def test_deterministic(self):
        a, ta = make_smiley_dataset(5)
        b, tb = make_smiley_dataset(5)
        assert np.array_equal(a.codes, b.codes)
        assert a.labels == b.labels
        assert np.array_equal(ta.assignments, tb.assignments)

    def test_shape_and_setup(self):
        ds, truth = make_smiley_dataset(0)
        assert ds.codes.shape == (SMILEY_N_OBSERVATIONS, 6)
        assert all(ds.features.size(j) == 3 for j in range(6))
        assert SMILEY_HYPER.n_clusters == 3
        assert SMILEY_HYPER.alpha == 0.1
        assert SMILEY_HYPER.subspace_rate == 0.5
        assert SMILEY_HYPER.pseudocount == 1.0
        assert SMILEY_HYPER.copy_strength == 50.0
        # all three planted clusters actually appear
        assert sorted(set(ds.labels)) == ["0", "1", "2"]

    def test_exactly_two_important_features_per_cluster(self):
        _, truth = make_smiley_dataset(1)
        assert truth.subspaces.shape == (3, 6)
        assert np.all(truth.subspaces.sum(axis=1) == 2)
        assert np.array_equal(truth.subspaces, SMILEY_SUBSPACES)

    def test_mixture_weights_near_degenerate(self):
        # symmetric Dirichlet(0.1/3) puts most observations near a corner;
        # Monte-Carlo on the unconditioned prior gives ~0.87 >= 0.8
        _, truth = make_smiley_dataset(2)
        frac = (truth.mixture_weights.max(axis=1) >= 0.9).mean()
        assert frac >= 0.8

    def test_labels_match_assignment_majority(self):
        ds, truth = make_smiley_dataset(3)
        for i in range(0, SMILEY_N_OBSERVATIONS, 17):
            counts = np.bincount(truth.assignments[i], minlength=3)
            assert ds.labels[i] == str(int(np.argmax(counts)))

    def test_prototype_rows_valid(self):
        ds, truth = make_smiley_dataset(4)
        sizes = ds.features.sizes
        assert truth.prototype_rows.shape == (3, 6)
        assert np.all(truth.prototype_rows >= 0)
        assert np.all(truth.prototype_rows < sizes[None, :])
