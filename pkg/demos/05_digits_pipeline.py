"""Pixel data end to end: discretize, fit, classify on mixture weights.

Uses scikit-learn's bundled 8x8 digits when available (a smaller cousin of
the 16x16 setting); otherwise synthesizes blocky pseudo-digits so the demo
always runs. Pixels are rescaled into seven bins, the model is fitted, the
per-observation mixture weights feed a linear max-margin classifier, and
each cluster's subspace is rendered as a pixel bitmap.
"""

import numpy as np

import bcm
from bcm.core import rebuild_counts
from bcm.evaluate import train_pi_classifier, unsupervised_accuracy
from bcm.explain import estimate_pi, extract_explanation, subspace_bitmap
from bcm.gibbs import ChainConfig, run_chain

PER_CLASS = 40


def load_pixels():
    try:
        from sklearn.datasets import load_digits
    except ImportError:
        return None
    raw = load_digits()
    rng = np.random.default_rng(0)
    keep = np.concatenate([
        rng.choice(np.flatnonzero(raw.target == d), size=PER_CLASS, replace=False)
        for d in range(10)
    ])
    return raw.data[keep], [str(t) for t in raw.target[keep]], (8, 8)


def synthesize_pixels():
    rng = np.random.default_rng(0)
    side = 8
    images, labels = [], []
    for cls in range(4):
        template = np.zeros((side, side))
        template[cls:cls + 3, :] = 12.0  # one bright band per class
        for _ in range(PER_CLASS):
            img = template + rng.uniform(0, 4, size=(side, side))
            images.append(img.ravel())
            labels.append(str(cls))
    return np.array(images), labels, (side, side)


loaded = load_pixels()
pixels, labels, (h, w) = loaded if loaded is not None else synthesize_pixels()
n_classes = len(set(labels))
print(f"{len(labels)} images of {h}x{w} pixels, {n_classes} classes")

# rescale each pixel column into seven bins
features = bcm.FeatureSpace(
    tuple(f"px{j}" for j in range(h * w)),
    tuple(tuple(str(b) for b in range(7)) for _ in range(h * w)),
)
lo = pixels.min(axis=0)
span = np.maximum(pixels.max(axis=0) - lo, 1e-9) * (1 + 1e-12)
codes = np.minimum((7 * (pixels - lo) / span).astype(np.int64), 6)
dataset = bcm.Dataset(features, codes, labels=labels)

# 8x8 images carry a quarter of the evidence per observation that 16x16
# ones do, so a slightly more diffuse mixing prior mixes better here
hyper = bcm.Hyperparams(n_clusters=n_classes, alpha=0.1, subspace_rate=0.8,
                        pseudocount=1.0, copy_strength=50.0)
state, trace = run_chain(
    dataset, hyper, ChainConfig(iterations=800, seed=0, log_every=80)
)
print("unsupervised accuracy over iterations:", np.round(trace.accuracy, 3))
print(f"final unsupervised accuracy: {unsupervised_accuracy(state, dataset):.3f}")

pi = estimate_pi(state, hyper)
_, acc, std = train_pi_classifier(pi, dataset.labels, folds=5, seed=0)
print(f"linear classifier on mixture weights: {acc:.3f} +/- {std:.3f}")
print()

counts = rebuild_counts(dataset, state)
explanation = extract_explanation(state, counts, dataset, hyper)
cluster = explanation.clusters[0]
print(f"cluster 0 prototype is observation {cluster.prototype_id} "
      f"(label {dataset.labels[cluster.prototype_index]})")
print("its subspace as a pixel bitmap ('#' = defining pixel):")
print(subspace_bitmap(cluster.subspace, w, h))
