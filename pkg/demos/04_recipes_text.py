"""Clustering set-valued text data: recipes as ingredient sets.

Each recipe becomes a row of binary ingredient-presence features. The
fitted clusters are then explained by a prototype recipe plus the
ingredients that define the cluster, which is far easier to read than a
table of per-ingredient probabilities.
"""

import numpy as np

import bcm
from bcm.core import rebuild_counts
from bcm.explain import explanation_to_markdown, extract_explanation
from bcm.gibbs import ChainConfig, run_chain

CHILI = ["beer", "chili powder", "tomato", "meat", "onion", "cumin", "garlic"]
BROWNIES = ["chocolate", "sugar", "flour", "eggs", "butter", "vanilla", "pecans"]
PUNCH = ["lemon juice", "orange juice", "pineapple juice", "sugar", "cloves",
         "cinnamon", "water"]

rng = np.random.default_rng(0)
recipes, names = [], []
for family, base in (("chili", CHILI), ("brownies", BROWNIES), ("punch", PUNCH)):
    for k in range(12):
        # each recipe keeps most of its family's ingredients, drops a couple
        keep = [t for t in base if rng.random() < 0.8]
        if rng.random() < 0.5:
            keep.append("salt")
        recipes.append(keep)
        names.append(f"{family}-{k}")

dataset = bcm.text_to_presence(recipes, 18, ids=names)
print(f"corpus: {dataset.n_observations} recipes, "
      f"{dataset.n_features} ingredient-presence features")
print("vocabulary:", ", ".join(dataset.features.names))
print()

hyper = bcm.Hyperparams(n_clusters=3, alpha=0.1, subspace_rate=0.3,
                        pseudocount=1.0, copy_strength=50.0)
state, _ = run_chain(dataset, hyper, ChainConfig(iterations=400, seed=0))
counts = rebuild_counts(dataset, state)
explanation = extract_explanation(state, counts, dataset, hyper)

for cluster in explanation.clusters:
    if cluster.empty:
        print(f"cluster {cluster.cluster}: empty")
        continue
    present = [n for n, v in zip(explanation.feature_names, cluster.prototype_row)
               if v == "1"]
    # a cluster can be defined by having an ingredient or by lacking it
    defining = [n if v == "1" else f"no {n}"
                for n, v in zip(cluster.subspace_features, cluster.subspace_values)]
    print(f"cluster {cluster.cluster}: prototype {cluster.prototype_id}")
    print(f"  ingredients: {', '.join(present)}")
    print(f"  defining:    {', '.join(defining) if defining else '(none)'}")
print()
print(explanation_to_markdown(explanation))
