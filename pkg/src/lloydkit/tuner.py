"""Configuration auto-tuning: learn which engine knobs fit a dataset.

The pipeline: extract a 14-entry shape summary of the dataset's tree
(``extract_features``), label datasets cheaply by timing only the strategy
pool that actually wins in practice (``selective_run``), train a small
decision tree or kNN on the labels, and map the two predicted heads (bound
strategy, index mode) back to a KnobConfig.  Quality is scored by mean
reciprocal rank against the measured per-dataset rankings.

Ground truth lives in JSONL files (one record per line, two files: one for
the bound head, one for the index head); models serialize to JSON.
"""

from __future__ import annotations

import json
import math
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .core import ContractError, RunContext, as_matrix, make_init
from .engine import KnobConfig, run_engine
from .tree import Tree, build_tree

FEATURE_NAMES = (
    "n", "k", "d",
    "height_norm", "internal_norm", "leaf_norm",
    "leaf_depth_mean", "leaf_depth_std",
    "leaf_radius_mean", "leaf_radius_std",
    "leaf_shift_mean", "leaf_shift_std",
    "leaf_occupancy_mean", "leaf_occupancy_std",
)

BOUND_POOL = ("hamerly", "drake", "heap", "yinyang", "regroup")
INDEX_LABELS = ("1", "2", "3", "4")  # none, pure, single, multiple
INDEX_MODE_OF_LABEL = {"1": "none", "2": "pure", "3": "single", "4": "multiple"}


def extract_features(data, k: int, tree: Tree, capacity: int) -> np.ndarray:
    """The 14-entry feature vector describing a dataset and its tree.

    Raw n, k, d first; then tree shape statistics, each normalized so the
    value is comparable across scales: depths by the balanced-tree depth
    log2(n/f) (clamped to 1 when not positive), radii and pivot shifts by
    the root radius (clamped to 1 when zero), occupancy by the capacity.
    Pure function of its arguments.
    """
    data = as_matrix(data)
    n, d = data.shape
    leaves = tree.leaves()
    internal = len(tree.nodes) - len(leaves)
    depth_norm = math.log2(n / capacity) if n > capacity else 0.0
    if depth_norm <= 0.0:
        depth_norm = 1.0
    root_r = tree.root.radius if tree.root.radius > 0.0 else 1.0
    per_leaf = n / capacity

    depths = np.array([lf.height for lf in leaves], dtype=np.float64)
    radii = np.array([lf.radius for lf in leaves], dtype=np.float64)
    shifts = np.array([lf.parent_shift for lf in leaves], dtype=np.float64)
    occupancy = np.array([lf.num for lf in leaves], dtype=np.float64)

    return np.array([
        float(n),
        float(k),
        float(d),
        tree.height / depth_norm,
        internal / per_leaf,
        len(leaves) / per_leaf,
        float(depths.mean()) / depth_norm,
        float(depths.std()) / depth_norm,
        float(radii.mean()) / root_r,
        float(radii.std()) / root_r,
        float(shifts.mean()) / root_r,
        float(shifts.std()) / root_r,
        float(occupancy.mean()) / capacity,
        float(occupancy.std()) / capacity,
    ])


# ---------------------------------------------------------------------------
# ground truth by selective running


@dataclass
class GroundTruthRecord:
    """Labels and measured rankings for one (dataset, k) cell."""

    features: list[float]
    bound_label: str
    index_label: str
    bound_ranking: list[str]
    index_ranking: list[str]
    dataset_id: str
    k: int
    bound_timing_ms: dict[str, float] = field(default_factory=dict)
    index_timing_ms: dict[str, float] = field(default_factory=dict)

    def head_json(self, head: str) -> str:
        if head == "bound":
            label, ranking, timing = self.bound_label, self.bound_ranking, self.bound_timing_ms
        elif head == "index":
            label, ranking, timing = self.index_label, self.index_ranking, self.index_timing_ms
        else:
            raise ContractError(f"unknown head {head!r}")
        return json.dumps({
            "features": self.features,
            "label": label,
            "ranking": ranking,
            "dataset_id": self.dataset_id,
            "k": self.k,
            "timing_ms": timing,
        })


def parse_truth_line(line: str) -> dict:
    rec = json.loads(line)
    for key in ("features", "label", "ranking"):
        if key not in rec:
            raise ContractError(f"ground-truth record missing {key!r}")
    return rec


def _timed_run(data, k, config: KnobConfig, init, repeats: int) -> float:
    """Median wall time (ms) across repeats, excluding index construction.

    Construction is excluded because an index is built once and reused
    across runs and k values; at this scale it would otherwise drown the
    per-iteration signal being labeled.
    """
    times = []
    for _ in range(repeats):
        ctx = RunContext(seed=config.seed)
        res = run_engine(data, k, config, init=init, ctx=ctx)
        times.append(res.total_wall_nanos() - res.build_nanos)
    return float(np.median(times)) / 1e6


def _ranked(timing: dict[str, float], universe: tuple[str, ...]) -> list[str]:
    """Measured labels by ascending time, then unmeasured in universe order."""
    measured = sorted(timing, key=lambda s: (timing[s], universe.index(s)))
    return measured + [s for s in universe if s not in timing]


def selective_run(data, k: int, *, capacity: int = 30, t_max: int = 5,
                  seed: int = 0, repeats: int = 3,
                  dataset_id: str = "") -> GroundTruthRecord:
    """Label one (dataset, k) cell by timing only the promising pool.

    Times the five-strategy sequential pool and picks the fastest as the
    bound label.  Then times the pure tree traversal: if it loses to the
    best sequential run, the index label is 1 (no index) and the remaining
    index options are not measured; if it wins, the single and multiple
    traversals (combined with the winning bound strategy) are measured too
    and the fastest of {pure, single, multiple} becomes the label.
    Rankings list measured options by time, then unmeasured ones in fixed
    order, so reciprocal ranks are always defined.
    """
    data = as_matrix(data)
    tree = build_tree(data, "ball", capacity)
    feats = extract_features(data, k, tree, capacity)
    init = make_init(RunContext(seed=seed), data, k)

    bound_ms: dict[str, float] = {}
    for name in BOUND_POOL:
        cfg = KnobConfig(index_mode="none", bound_strategy=name, t_max=t_max, seed=seed)
        bound_ms[name] = _timed_run(data, k, cfg, init, repeats)
    bound_ranking = _ranked(bound_ms, BOUND_POOL)
    bound_label = bound_ranking[0]
    best_seq_ms = bound_ms[bound_label]

    index_ms: dict[str, float] = {"1": best_seq_ms}
    pure = KnobConfig(index_mode="pure", index_kind="ball", capacity=capacity,
                      t_max=t_max, seed=seed)
    index_ms["2"] = _timed_run(data, k, pure, init, repeats)
    if index_ms["2"] < best_seq_ms:
        for label, mode in (("3", "single"), ("4", "multiple")):
            cfg = KnobConfig(index_mode=mode, bound_strategy=bound_label,
                             index_kind="ball", capacity=capacity, t_max=t_max, seed=seed)
            index_ms[label] = _timed_run(data, k, cfg, init, repeats)
    index_ranking = _ranked(index_ms, INDEX_LABELS)
    index_label = index_ranking[0]

    return GroundTruthRecord(
        features=[float(v) for v in feats],
        bound_label=bound_label,
        index_label=index_label,
        bound_ranking=bound_ranking,
        index_ranking=index_ranking,
        dataset_id=dataset_id,
        k=k,
        bound_timing_ms={s: round(v, 6) for s, v in bound_ms.items()},
        index_timing_ms={s: round(v, 6) for s, v in index_ms.items()},
    )


# ---------------------------------------------------------------------------
# classifiers (from scratch, deterministic)


def _gini(labels: list[str]) -> float:
    total = len(labels)
    if total == 0:
        return 0.0
    counts = Counter(labels)
    return 1.0 - sum((c / total) ** 2 for c in counts.values())


def _majority(labels: list[str]) -> str:
    counts = Counter(labels)
    best = max(counts.values())
    return min(lbl for lbl, c in counts.items() if c == best)


class DecisionTree:
    """CART with Gini impurity and binary threshold splits.

    Deterministic: features are scanned in index order, thresholds
    ascending, and only strictly better splits replace the incumbent, so
    equal-quality ties keep the lowest feature index and threshold.
    """

    def __init__(self, max_depth: int = 10, min_leaf: int = 1):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.root: dict | None = None

    def fit(self, X, y: list[str]) -> "DecisionTree":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or len(X) == 0:
            raise ContractError("need a nonempty 2-D feature matrix")
        if len(X) != len(y):
            raise ContractError("features and labels disagree in length")
        self.root = self._grow(X, list(y), 0)
        return self

    def _grow(self, X: np.ndarray, y: list[str], depth: int) -> dict:
        if depth >= self.max_depth or len(set(y)) == 1 or len(y) < 2 * self.min_leaf:
            return {"label": _majority(y)}
        best = None
        parent_gini = _gini(y)
        for f in range(X.shape[1]):
            vals = np.unique(X[:, f])
            if len(vals) < 2:
                continue
            for thr in (vals[:-1] + vals[1:]) / 2.0:
                left = X[:, f] <= thr
                nl = int(left.sum())
                nr = len(y) - nl
                if nl < self.min_leaf or nr < self.min_leaf:
                    continue
                yl = [y[i] for i in np.nonzero(left)[0]]
                yr = [y[i] for i in np.nonzero(~left)[0]]
                score = (nl * _gini(yl) + nr * _gini(yr)) / len(y)
                if best is None or score < best[0]:
                    best = (score, f, float(thr), left)
        if best is None or best[0] >= parent_gini:
            return {"label": _majority(y)}
        _, f, thr, left = best
        return {
            "feature_index": f,
            "threshold": thr,
            "left": self._grow(X[left], [y[i] for i in np.nonzero(left)[0]], depth + 1),
            "right": self._grow(X[~left], [y[i] for i in np.nonzero(~left)[0]], depth + 1),
        }

    def predict(self, features) -> str:
        if self.root is None:
            raise ContractError("predict before fit")
        node = self.root
        x = np.asarray(features, dtype=np.float64)
        while "label" not in node:
            node = node["left"] if x[node["feature_index"]] <= node["threshold"] else node["right"]
        return node["label"]

    def predict_many(self, X) -> list[str]:
        return [self.predict(row) for row in np.asarray(X, dtype=np.float64)]

    def to_dict(self) -> dict:
        return {"model": "cart", "max_depth": self.max_depth,
                "min_leaf": self.min_leaf, "root": self.root}

    @classmethod
    def from_dict(cls, obj: dict) -> "DecisionTree":
        out = cls(max_depth=obj.get("max_depth", 10), min_leaf=obj.get("min_leaf", 1))
        out.root = obj["root"]
        return out


class KnnClassifier:
    """k-nearest-neighbor vote (k=5) on z-scored features.

    Ties are broken deterministically: neighbors are ordered by (distance,
    training index), and tied vote counts go to the label of the nearest
    neighbor holding one of the tied labels.
    """

    def __init__(self, k: int = 5):
        self.k = k
        self.X: np.ndarray | None = None
        self.y: list[str] = []
        self.mean: np.ndarray | None = None
        self.std: np.ndarray | None = None

    def fit(self, X, y: list[str]) -> "KnnClassifier":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or len(X) == 0:
            raise ContractError("need a nonempty 2-D feature matrix")
        self.mean = X.mean(axis=0)
        std = X.std(axis=0)
        std[std == 0.0] = 1.0
        self.std = std
        self.X = (X - self.mean) / self.std
        self.y = list(y)
        return self

    def predict(self, features) -> str:
        if self.X is None:
            raise ContractError("predict before fit")
        z = (np.asarray(features, dtype=np.float64) - self.mean) / self.std
        dist = np.sqrt(np.sum((self.X - z) ** 2, axis=1))
        order = np.lexsort((np.arange(len(dist)), dist))
        near = order[: min(self.k, len(order))]
        votes = Counter(self.y[i] for i in near)
        top = max(votes.values())
        tied = {lbl for lbl, c in votes.items() if c == top}
        for i in near:
            if self.y[i] in tied:
                return self.y[i]
        raise AssertionError("unreachable: a tied label must appear among neighbors")

    def predict_many(self, X) -> list[str]:
        return [self.predict(row) for row in np.asarray(X, dtype=np.float64)]

    def to_dict(self) -> dict:
        return {"model": "knn", "k": self.k, "X": self.X.tolist(), "y": self.y,
                "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "KnnClassifier":
        out = cls(k=obj.get("k", 5))
        out.X = np.asarray(obj["X"], dtype=np.float64)
        out.y = list(obj["y"])
        out.mean = np.asarray(obj["mean"], dtype=np.float64)
        out.std = np.asarray(obj["std"], dtype=np.float64)
        return out


def train_tree(records: list[dict], max_depth: int = 10, min_leaf: int = 1) -> DecisionTree:
    """Fit the CART head on parsed ground-truth records."""
    if not records:
        raise ContractError("no ground-truth records to train on")
    X = np.array([r["features"] for r in records], dtype=np.float64)
    y = [r["label"] for r in records]
    return DecisionTree(max_depth=max_depth, min_leaf=min_leaf).fit(X, y)


def train_knn(records: list[dict], k: int = 5) -> KnnClassifier:
    if not records:
        raise ContractError("no ground-truth records to train on")
    X = np.array([r["features"] for r in records], dtype=np.float64)
    y = [r["label"] for r in records]
    return KnnClassifier(k=k).fit(X, y)


def save_model(model, head: str, path: str):
    obj = model.to_dict()
    obj["head"] = head
    obj["feature_names"] = list(FEATURE_NAMES)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh)


def load_model(path: str):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    kind = obj.get("model")
    if kind == "cart":
        return DecisionTree.from_dict(obj)
    if kind == "knn":
        return KnnClassifier.from_dict(obj)
    raise ContractError(f"unknown model kind {kind!r} in {path}")


# ---------------------------------------------------------------------------
# prediction, scoring, baseline


def predict_config(model_bound, model_index, features, *,
                   capacity: int = 30, t_max: int = 10, seed: int = 0) -> KnobConfig:
    """Combine the two predicted heads into one runnable KnobConfig."""
    bound = model_bound.predict(features)
    idx = model_index.predict(features)
    mode = INDEX_MODE_OF_LABEL.get(str(idx))
    if mode is None:
        raise ContractError(f"index head predicted unknown label {idx!r}")
    if mode == "pure":
        bound = "none"
    return KnobConfig(index_mode=mode, bound_strategy=bound,
                      capacity=capacity, t_max=t_max, seed=seed).validate()


def mrr(predictions: list[str], rankings: list[list[str]]) -> float:
    """Mean reciprocal rank of each prediction within its truth ranking."""
    if len(predictions) != len(rankings):
        raise ContractError("predictions and rankings disagree in length")
    if not predictions:
        raise ContractError("nothing to score")
    total = 0.0
    for pred, ranking in zip(predictions, rankings):
        if pred not in ranking:
            raise ContractError(f"prediction {pred!r} absent from ranking {ranking}")
        total += 1.0 / (ranking.index(pred) + 1)
    return total / len(predictions)


def baseline_bdt(features) -> KnobConfig:
    """The hard-coded folklore rules the learned tree has to beat.

    Low dimensionality favors the tree index outright; otherwise pick the
    group-bound strategy when k is large and the global-bound one when it
    is small.
    """
    x = np.asarray(features, dtype=np.float64)
    k, d = x[1], x[2]
    if d < 20:
        return KnobConfig(index_mode="pure", bound_strategy="none")
    if k >= 50:
        return KnobConfig(index_mode="none", bound_strategy="yinyang")
    return KnobConfig(index_mode="none", bound_strategy="hamerly")


def baseline_labels(features) -> tuple[str, str]:
    """(bound, index) head labels of the baseline rules, for MRR scoring.

    The bound head applies the k rule even when the index rule fires, so
    the baseline always has a bound prediction to rank.
    """
    x = np.asarray(features, dtype=np.float64)
    k, d = x[1], x[2]
    bound = "yinyang" if k >= 50 else "hamerly"
    index = "2" if d < 20 else "1"
    return bound, index


def split_records(records: list[dict], test_frac: float = 0.3, seed: int = 0):
    """Seeded shuffle, then a train/test split (default 70/30)."""
    if not records:
        raise ContractError("no records to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(records))
    n_test = int(round(len(records) * test_frac))
    n_test = min(max(n_test, 1), len(records) - 1) if len(records) > 1 else 0
    test_idx = set(order[:n_test].tolist())
    train = [records[i] for i in range(len(records)) if i not in test_idx]
    test = [records[i] for i in range(len(records)) if i in test_idx]
    return train, test


def holdout_mrr(train: list[dict], test: list[dict], *,
                model: str = "cart", max_depth: int = 10) -> float:
    """Train one head on train records, score MRR on the held-out ones."""
    if model == "cart":
        clf = train_tree(train, max_depth=max_depth)
    elif model == "knn":
        clf = train_knn(train)
    else:
        raise ContractError(f"unknown model {model!r}")
    preds = [clf.predict(r["features"]) for r in test]
    return mrr(preds, [r["ranking"] for r in test])
