"""The baseline loop is the oracle everything else is compared against, so
it gets its own independent reference implementation here."""

import numpy as np
import pytest

from lloydkit.core import ContractError, RunContext, make_init
from lloydkit.lloyd import assign_full, refine_full, run_lloyd


def reference_lloyd(data, init, t_max):
    """Textbook loop, written without the library's kernels."""
    centers = init.copy()
    history = []
    for _ in range(t_max):
        d2 = ((data[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)  # argmin takes the lowest index on ties
        history.append(assign.copy())
        new = centers.copy()
        for j in range(centers.shape[0]):
            members = data[assign == j]
            if len(members):
                new[j] = members.mean(axis=0)
        if history[:-1] and np.array_equal(history[-1], history[-2]):
            centers = new
            break
        centers = new
    return history, centers


def blobs(n=90, d=2, k=3, seed=0, spread=0.4):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(size=(k, d)) * 10
    labels = rng.integers(0, k, size=n)
    return centers[labels] + rng.normal(0, spread, size=(n, d))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_matches_reference_assignments(seed):
    data = blobs(seed=seed)
    ctx = RunContext(seed=seed)
    init = make_init(ctx, data, 3)
    res = run_lloyd(data, 3, init=init, t_max=8, ctx=ctx)
    ref_history, ref_centers = reference_lloyd(data, init, 8)
    assert len(res.assign_history) <= len(ref_history)
    for mine, ref in zip(res.assign_history, ref_history):
        assert np.array_equal(mine, ref)
    if res.converged:
        assert np.allclose(res.centroids, ref_centers, rtol=1e-12, atol=1e-12)


def test_tie_break_prefers_lowest_index():
    data = np.array([[0.0, 0.0], [4.0, 0.0]])
    centers = np.array([[1.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    ctx = RunContext(seed=0)
    assign = assign_full(ctx, data, centers)
    assert assign.tolist() == [0, 2]


def test_dist_comps_exactly_t_n_k():
    data = blobs(n=75, k=4, seed=5)
    ctx = RunContext(seed=5)
    res = run_lloyd(data, 4, t_max=6, ctx=ctx)
    t = len(res.iterations)
    assert ctx.counters.dist_comps == t * 75 * 4
    for st in res.iterations:
        assert st.dist_comps == 75 * 4
        assert st.pruning_power(75, 4) == 0.0


def test_empty_cluster_keeps_previous_centroid():
    data = np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]])
    centers = np.array([[0.5, 0.0], [10.0, 0.0], [99.0, 99.0]])
    ctx = RunContext(seed=0)
    assign = np.array([0, 0, 1])
    new = refine_full(ctx, data, assign, centers)
    assert np.allclose(new[0], [0.5, 0.0])
    assert np.allclose(new[1], [10.0, 0.0])
    assert np.allclose(new[2], [99.0, 99.0])  # empty, untouched


def test_stops_when_assignments_freeze():
    data = blobs(n=60, k=2, seed=7, spread=0.05)
    res = run_lloyd(data, 2, t_max=50, ctx=RunContext(seed=7))
    assert res.converged
    assert len(res.iterations) < 50
    last = res.assign_history[-1]
    prev = res.assign_history[-2]
    assert np.array_equal(last, prev)


def test_respects_t_max_and_records_history():
    data = blobs(n=50, k=5, seed=8, spread=3.0)
    res = run_lloyd(data, 5, t_max=3, ctx=RunContext(seed=8))
    assert len(res.iterations) <= 3
    assert len(res.assign_history) == len(res.iterations)
    for st, hist in zip(res.iterations, res.assign_history):
        assert hist.shape == (50,)
        assert st.sse >= 0.0


def test_sse_never_increases_between_iterations():
    data = blobs(n=120, k=4, seed=9, spread=1.5)
    res = run_lloyd(data, 4, t_max=12, ctx=RunContext(seed=9))
    sses = [st.sse for st in res.iterations]
    for a, b in zip(sses, sses[1:]):
        assert b <= a + 1e-9


def test_k_must_fit_data():
    data = blobs(n=10)
    with pytest.raises(ContractError):
        run_lloyd(data, 11, ctx=RunContext(seed=0))
    with pytest.raises(ContractError):
        run_lloyd(data, 0, ctx=RunContext(seed=0))
