import numpy as np
import pytest

import bcm
from bcm.core import rebuild_counts
from bcm.gibbs import ChainConfig, run_chain


@pytest.fixture(scope="session")
def smiley():
    dataset, truth = bcm.make_smiley_dataset(0)
    return dataset, truth


@pytest.fixture(scope="session")
def smiley_fit(smiley):
    """One full fit of the smiley data, shared across tests."""
    dataset, truth = smiley
    hyper = bcm.generate.SMILEY_HYPER
    state, trace = run_chain(
        dataset, hyper, ChainConfig(iterations=1000, seed=0, log_every=50)
    )
    counts = rebuild_counts(dataset, state)
    return dataset, truth, hyper, state, counts, trace


def tiny_dataset(seed=0, n_obs=4, sizes=(2, 3)):
    rng = np.random.default_rng(seed)
    features = bcm.FeatureSpace(
        tuple(f"f{j}" for j in range(len(sizes))),
        tuple(tuple(str(v) for v in range(k)) for k in sizes),
    )
    codes = np.column_stack(
        [rng.integers(0, k, size=n_obs, dtype=np.int64) for k in sizes]
    )
    return bcm.Dataset(features, codes)


def random_state_for(dataset, n_clusters, seed=0):
    rng = np.random.default_rng(seed)
    n_obs, n_feat = dataset.codes.shape
    return bcm.ModelState(
        rng.integers(0, n_clusters, size=(n_obs, n_feat), dtype=np.int64),
        rng.integers(0, n_obs, size=n_clusters, dtype=np.int64),
        rng.integers(0, 2, size=(n_clusters, n_feat), dtype=np.int64),
    )
