"""Learn which configuration to run from dataset shape alone.

Labels a grid of synthetic datasets by selective running (time the five
plausible sequential strategies, then the tree variants only when the tree
is competitive), trains the small decision tree and the nearest-neighbor
model on the 14-entry shape features, and scores both against the
hard-coded folklore rules on a held-out split.  Finishes by picking a
configuration for a dataset the models never saw and running it.
"""

import time

from lloydkit import KnobConfig, RunContext, gen_gaussian, mrr, run_engine
from lloydkit.tree import build_tree
from lloydkit.tuner import (
    baseline_labels,
    extract_features,
    predict_config,
    selective_run,
    split_records,
    train_knn,
    train_tree,
)


def main():
    t0 = time.perf_counter()
    bound_records, index_records = [], []
    cell = 0
    for n in (300, 800, 2000):
        for d in (2, 8, 24):
            for k in (4, 16, 48):
                for var in (1e-4, 1e-2):
                    cell += 1
                    data, _ = gen_gaussian(n, d, max(2, k // 2), var, seed=cell)
                    rec = selective_run(data, k, t_max=5, seed=cell, repeats=3,
                                        dataset_id=f"cell{cell}")
                    bound_records.append({"features": rec.features,
                                          "label": rec.bound_label,
                                          "ranking": rec.bound_ranking})
                    index_records.append({"features": rec.features,
                                          "label": rec.index_label,
                                          "ranking": rec.index_ranking})
    print(f"labeled {len(bound_records)} cells by selective running "
          f"in {time.perf_counter() - t0:.0f}s")

    models = {}
    for head, records in (("bound", bound_records), ("index", index_records)):
        train, test = split_records(records, test_frac=0.3, seed=0)
        tree_model = train_tree(train)
        knn_model = train_knn(train)
        rankings = [r["ranking"] for r in test]
        scores = {
            "decision tree": mrr([tree_model.predict(r["features"]) for r in test], rankings),
            "nearest neighbors": mrr([knn_model.predict(r["features"]) for r in test], rankings),
            "folklore rules": mrr([baseline_labels(r["features"])[head == "index"]
                                   for r in test], rankings),
        }
        print(f"\n{head} head, mean reciprocal rank on {len(test)} held-out cells:")
        for name, score in sorted(scores.items(), key=lambda kv: -kv[1]):
            print(f"  {name:18s} {score:.3f}")
        models[head] = tree_model

    fresh, _ = gen_gaussian(5000, 3, 20, 5e-4, seed=999)
    feats = extract_features(fresh, 20, build_tree(fresh, "ball", 30), 30)
    config = predict_config(models["bound"], models["index"], feats, t_max=10)
    print(f"\nfresh dataset (n=5000 d=3 k=20): predicted config {config.label()}")
    chosen = run_engine(fresh, 20, config, ctx=RunContext(seed=999))
    plain = run_engine(fresh, 20, KnobConfig(t_max=10), ctx=RunContext(seed=999))
    print(f"predicted config: {chosen.total_wall_nanos() / 1e6:.0f}ms, "
          f"plain loop: {plain.total_wall_nanos() / 1e6:.0f}ms")


if __name__ == "__main__":
    main()
