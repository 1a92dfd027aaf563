"""Exact k-means, accelerated: pruning strategies, tree engines, auto-tuning.

Everything here returns the same per-iteration assignments as Lloyd's
algorithm (lowest-index tie-break included); the variants differ only in
how much work they avoid proving it.
"""

from .core import ContractError, Counters, RunContext, make_init, sse
from .lloyd import IterationStats, RunResult, run_lloyd
from .tree import Tree, TreeNode, build_tree, range_search
from .pruners import STRATEGIES, run_pruner
from .engine import (
    BOUND_STRATEGIES,
    INDEX_MODES,
    ClusterRecords,
    KnobConfig,
    incremental_refine,
    run_engine,
)
from .bench import (
    RunLog,
    footprint_estimate,
    gen_gaussian,
    load_dataset,
    make_report,
    parse_algo,
    run_benchmark,
)
from .tuner import (
    FEATURE_NAMES,
    DecisionTree,
    GroundTruthRecord,
    KnnClassifier,
    baseline_bdt,
    extract_features,
    mrr,
    predict_config,
    selective_run,
    train_knn,
    train_tree,
)

__version__ = "0.1.0"

__all__ = [
    "BOUND_STRATEGIES",
    "ClusterRecords",
    "ContractError",
    "Counters",
    "DecisionTree",
    "FEATURE_NAMES",
    "GroundTruthRecord",
    "INDEX_MODES",
    "IterationStats",
    "KnnClassifier",
    "KnobConfig",
    "RunContext",
    "RunLog",
    "RunResult",
    "STRATEGIES",
    "Tree",
    "TreeNode",
    "baseline_bdt",
    "build_tree",
    "extract_features",
    "footprint_estimate",
    "gen_gaussian",
    "incremental_refine",
    "load_dataset",
    "make_init",
    "make_report",
    "mrr",
    "parse_algo",
    "predict_config",
    "range_search",
    "run_benchmark",
    "run_engine",
    "run_lloyd",
    "run_pruner",
    "selective_run",
    "sse",
    "train_knn",
    "train_tree",
    "__version__",
]
