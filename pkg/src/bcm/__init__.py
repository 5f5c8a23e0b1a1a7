"""Prototype and subspace clustering of discrete data.

Each cluster is characterized by a prototype (an actual observation) and a
binary subspace of defining features; inference runs a collapsed Gibbs
sampler over cell assignments, subspace indicators, and prototypes.
"""

from .core import (
    CountTables,
    Dataset,
    FeatureSpace,
    Hyperparams,
    ModelState,
    g_vector,
    rebuild_counts,
)
from .errors import BcmError, ConfigError, DataError, NumericalError
from .evaluate import (
    EvalReport,
    best_permutation_accuracy,
    dominant_clusters,
    evaluate_model,
    sensitivity_sweep,
    train_pi_classifier,
    unsupervised_accuracy,
)
from .explain import (
    Explanation,
    estimate_phi,
    estimate_pi,
    extract_explanation,
    explanation_to_markdown,
    subspace_bitmap,
)
from .generate import (
    GenerativeDraw,
    PlantedTruth,
    make_smiley_dataset,
    sample_prior,
)
from .geweke import run_geweke
from .gibbs import (
    ChainConfig,
    ChainTrace,
    collapsed_log_score,
    cond_omega,
    cond_p,
    cond_z,
    run_chain,
    sweep,
)
from .io import (
    IngestSpec,
    ingest,
    read_dataset_csv,
    text_to_presence,
    write_dataset_csv,
)
from .oracle import run_oracle_check

__version__ = "0.1.0"

__all__ = [
    "BcmError",
    "ChainConfig",
    "ChainTrace",
    "ConfigError",
    "CountTables",
    "DataError",
    "Dataset",
    "EvalReport",
    "Explanation",
    "FeatureSpace",
    "GenerativeDraw",
    "Hyperparams",
    "IngestSpec",
    "ModelState",
    "NumericalError",
    "PlantedTruth",
    "best_permutation_accuracy",
    "collapsed_log_score",
    "cond_omega",
    "cond_p",
    "cond_z",
    "dominant_clusters",
    "estimate_phi",
    "estimate_pi",
    "evaluate_model",
    "explanation_to_markdown",
    "extract_explanation",
    "g_vector",
    "ingest",
    "make_smiley_dataset",
    "read_dataset_csv",
    "rebuild_counts",
    "run_chain",
    "run_geweke",
    "run_oracle_check",
    "sample_prior",
    "sensitivity_sweep",
    "subspace_bitmap",
    "sweep",
    "text_to_presence",
    "train_pi_classifier",
    "unsupervised_accuracy",
    "write_dataset_csv",
]
