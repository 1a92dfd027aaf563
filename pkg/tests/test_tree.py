import numpy as np
import pytest

from lloydkit.core import ContractError, RunContext
from lloydkit.tree import (
    balltree_node_test,
    build_tree,
    kdtree_filter,
    range_search,
)


def random_data(rng, n=None, d=None):
    n = n or int(rng.integers(5, 400))
    d = d or int(rng.integers(1, 6))
    return rng.normal(size=(n, d)) * rng.uniform(0.5, 5)


def check_node_invariants(tree):
    """Every statistic a node carries must be recomputable from its slice."""
    data = tree.data
    for node in tree.nodes:
        rows = tree.covered(node)
        pts = data[rows]
        assert node.num == len(rows) > 0
        assert np.allclose(node.sum_vec, pts.sum(axis=0), rtol=1e-9, atol=1e-9)
        assert np.allclose(node.pivot, node.sum_vec / node.num, rtol=1e-12)
        dmax = np.sqrt(((pts - node.pivot) ** 2).sum(axis=1)).max()
        assert node.radius >= dmax - 1e-9
        if node.children:
            a, b = node.children
            assert (a.start, a.end, b.start, b.end) == (node.start, a.end, a.end, node.end)
            assert a.num + b.num == node.num
            assert np.allclose(a.sum_vec + b.sum_vec, node.sum_vec, rtol=1e-9, atol=1e-9)
            for ch in (a, b):
                assert ch.height == node.height + 1
                shift = float(np.linalg.norm(ch.pivot - node.pivot))
                assert ch.parent_shift == pytest.approx(shift, abs=1e-12)
        if node.box_lo is not None:
            assert np.all(pts >= node.box_lo - 1e-12)
            assert np.all(pts <= node.box_hi + 1e-12)
    assert np.array_equal(np.sort(tree.indices), np.arange(data.shape[0]))
    assert tree.root.parent_shift == 0.0 and tree.root.height == 0


@pytest.mark.parametrize("kind,capacity", [("ball", 30), ("ball", 4), ("kd", 1), ("kd", 8)])
def test_build_invariants(kind, capacity):
    rng = np.random.default_rng(11)
    for _ in range(6):
        tree = build_tree(random_data(rng), kind, capacity)
        check_node_invariants(tree)
        for leaf in tree.leaves():
            pts = tree.data[tree.covered(leaf)]
            identical = np.all(pts == pts[0])
            assert leaf.num <= capacity or identical


def test_duplicate_points_build_finite_trees():
    data = np.ones((100, 3))
    for kind in ("ball", "kd"):
        tree = build_tree(data, kind, 10)
        check_node_invariants(tree)
        assert tree.root.radius == 0.0


def test_balanced_dyadic_line_has_expected_shape():
    # 960 collinear points split in exact halves: 32 leaves of 30 at depth 5
    data = np.zeros((960, 2))
    data[:, 0] = np.arange(960.0)
    tree = build_tree(data, "ball", 30)
    leaves = tree.leaves()
    assert tree.height == 5
    assert len(leaves) == 32
    assert all(lf.num == 30 and lf.height == 5 for lf in leaves)


def test_capacity_validation():
    with pytest.raises(ContractError):
        build_tree(np.ones((4, 2)), "ball", 0)
    with pytest.raises(ContractError):
        build_tree(np.ones((4, 2)), "spiral", 3)


def test_node_test_is_sound():
    """When the pivot test claims the whole node prefers c1, it must be right
    for every covered point, strictly."""
    rng = np.random.default_rng(12)
    fired = 0
    for _ in range(40):
        data = random_data(rng, d=3)
        tree = build_tree(data, "ball", 8)
        c1, c2 = rng.normal(size=(2, 3)) * 3
        for node in tree.nodes:
            if balltree_node_test(node, c1, c2):
                fired += 1
                pts = tree.data[tree.covered(node)]
                d1 = np.sqrt(((pts - c1) ** 2).sum(axis=1))
                d2 = np.sqrt(((pts - c2) ** 2).sum(axis=1))
                assert np.all(d1 < d2)
    assert fired > 0


def test_kd_filter_never_drops_a_points_nearest():
    rng = np.random.default_rng(13)
    kept_less = 0
    for _ in range(60):
        d = int(rng.integers(1, 5))
        data = rng.normal(size=(int(rng.integers(8, 60)), d))
        tree = build_tree(data, "kd", 4)
        centers = rng.normal(size=(int(rng.integers(2, 9)), d)) * 2
        for node in tree.nodes:
            survivors = kdtree_filter(node, centers)
            if len(survivors) < len(centers):
                kept_less += 1
            pts = tree.data[tree.covered(node)]
            dist = np.sqrt(((pts[:, None, :] - centers[None]) ** 2).sum(axis=2))
            nearest = dist.argmin(axis=1)
            assert set(nearest.tolist()) <= set(survivors.tolist())
    assert kept_less > 0  # the filter must actually do something


def test_kd_filter_respects_candidate_subset():
    rng = np.random.default_rng(14)
    data = rng.normal(size=(30, 2))
    tree = build_tree(data, "kd", 4)
    centers = rng.normal(size=(6, 2)) * 2
    cand = np.array([1, 3, 5])
    out = kdtree_filter(tree.root, centers, cand)
    assert set(out.tolist()) <= set(cand.tolist())
    assert len(out) >= 1


def test_range_search_matches_linear_scan():
    rng = np.random.default_rng(15)
    for _ in range(25):
        data = random_data(rng)
        tree = build_tree(data, "ball", 16)
        center = rng.normal(size=data.shape[1]) * 2
        radius = float(rng.uniform(0.1, 4.0))
        ctx = RunContext(seed=0)
        rows, dists = range_search(ctx, tree, center, radius)
        true = np.sqrt(((data - center) ** 2).sum(axis=1))
        expect = set(np.nonzero(true <= radius)[0].tolist())
        assert set(rows.tolist()) == expect
        assert np.allclose(dists, true[rows])
        # pruning means not every point was measured, on most draws
        assert ctx.counters.dist_comps <= data.shape[0]
    with pytest.raises(ContractError):
        range_search(RunContext(seed=0), tree, center, -1.0)
