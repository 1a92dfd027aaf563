"""Every pruning strategy must be indistinguishable from the plain loop:
same assignment at every iteration, same centroids, fewer measured
distances.  The shadow validator re-checks every stored bound against true
distances while these run."""

import numpy as np
import pytest

from lloydkit.core import RunContext, make_init
from lloydkit.lloyd import run_lloyd
from lloydkit.pruners import STRATEGIES, run_pruner

ALL = sorted(STRATEGIES)


def dataset(kind, seed=0):
    rng = np.random.default_rng(seed)
    if kind == "blobs":
        centers = rng.uniform(size=(6, 3)) * 8
        labels = rng.integers(0, 6, size=150)
        return centers[labels] + rng.normal(0, 0.3, size=(150, 3))
    if kind == "uniform":
        return rng.uniform(size=(120, 4))
    if kind == "dups":
        base = rng.normal(size=(30, 2))
        return np.repeat(base, 4, axis=0)  # heavy ties
    raise AssertionError(kind)


def run_pair(data, k, strategy, seed=0, t_max=8):
    init = make_init(RunContext(seed=seed), data, k)
    ref = run_lloyd(data, k, init=init, t_max=t_max, ctx=RunContext(seed=seed))
    ctx = RunContext(seed=seed, debug_validate=True)
    res = run_pruner(data, k, strategy, init=init, t_max=t_max, ctx=ctx)
    return ref, res, ctx


@pytest.mark.parametrize("strategy", ALL)
@pytest.mark.parametrize("kind", ["blobs", "uniform", "dups"])
def test_identical_to_lloyd(strategy, kind):
    data = dataset(kind)
    k = 5 if kind != "dups" else 4
    ref, res, ctx = run_pair(data, k, strategy)
    assert len(res.assign_history) == len(ref.assign_history)
    for t, (mine, theirs) in enumerate(zip(res.assign_history, ref.assign_history)):
        assert np.array_equal(mine, theirs), f"{strategy} diverged at iteration {t}"
    assert np.array_equal(res.centroids, ref.centroids), strategy
    assert res.converged == ref.converged
    assert ctx.violations == []


@pytest.mark.parametrize("strategy", ALL)
def test_distance_budget(strategy):
    data = dataset("blobs", seed=3)
    n, k = data.shape[0], 6
    _, res, _ = run_pair(data, k, strategy, seed=3)
    for st in res.iterations:
        assert st.dist_comps <= n * k, strategy
    if strategy != "search":
        # nothing is known before the first assignment
        assert res.iterations[0].dist_comps == n * k, strategy


@pytest.mark.parametrize("strategy", ALL)
def test_later_iterations_actually_prune(strategy):
    data = dataset("blobs", seed=4)
    n, k = data.shape[0], 6
    _, res, _ = run_pair(data, k, strategy, seed=4)
    tail = [st.dist_comps for st in res.iterations[1:]]
    assert tail, "needs at least two iterations to say anything"
    assert min(tail) < n * k, strategy


@pytest.mark.parametrize("strategy", ALL)
@pytest.mark.parametrize("k", [1, 2, 3])
def test_tiny_k(strategy, k):
    data = dataset("uniform", seed=5)
    ref, res, ctx = run_pair(data, k, strategy, seed=5)
    for mine, theirs in zip(res.assign_history, ref.assign_history):
        assert np.array_equal(mine, theirs)
    assert np.array_equal(res.centroids, ref.centroids)
    assert ctx.violations == []


@pytest.mark.parametrize("strategy", ["elkan", "hamerly", "yinyang", "drake", "heap"])
def test_n_equals_k(strategy):
    rng = np.random.default_rng(6)
    data = rng.normal(size=(7, 2))
    ref, res, _ = run_pair(data, 7, strategy, seed=6)
    assert np.array_equal(res.centroids, ref.centroids)


@pytest.mark.parametrize("strategy", ALL)
def test_t_max_one(strategy):
    data = dataset("uniform", seed=7)
    ref, res, _ = run_pair(data, 4, strategy, seed=7, t_max=1)
    assert len(res.assign_history) == 1
    assert np.array_equal(res.assign_history[0], ref.assign_history[0])


def test_unknown_strategy_rejected():
    from lloydkit.core import ContractError
    with pytest.raises(ContractError):
        run_pruner(dataset("uniform"), 3, "warp", ctx=RunContext(seed=0))


def test_labels_report_strategy_names():
    data = dataset("uniform", seed=8)
    for strategy in ("hamerly", "search"):
        res = run_pruner(data, 3, strategy, ctx=RunContext(seed=8))
        assert res.label == strategy
