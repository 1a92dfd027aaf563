"""Space-partitioning indexes over the data: ball-tree and kd-tree.

Both trees share one node type carrying the statistics batch assignment
needs: the pivot (mean of covered points), the covering radius, the sum
vector and count (so a whole node can be moved between clusters without
touching its points), the height, and the pivot's shift from its parent
pivot (used to derive child bounds from parent bounds).  kd-tree nodes
additionally carry their bounding box.

Construction reorders a permutation of row indices so every node covers a
contiguous slice; assigning a node wholesale is then a single vectorized
write.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ContractError, RunContext, as_matrix


@dataclass
class TreeNode:
    node_id: int
    pivot: np.ndarray
    radius: float
    sum_vec: np.ndarray
    num: int
    height: int
    parent_shift: float
    start: int
    end: int
    children: list["TreeNode"] = field(default_factory=list)
    box_lo: np.ndarray | None = None
    box_hi: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class Tree:
    kind: str
    root: TreeNode
    nodes: list[TreeNode]
    indices: np.ndarray
    data: np.ndarray
    capacity: int

    def covered(self, node: TreeNode) -> np.ndarray:
        """Row indices under a node (a view into the build permutation)."""
        return self.indices[node.start:node.end]

    def leaves(self) -> list[TreeNode]:
        return [n for n in self.nodes if n.is_leaf]

    @property
    def height(self) -> int:
        return max(n.height for n in self.nodes)


def _node_stats(data: np.ndarray, rows: np.ndarray):
    pts = data[rows]
    sv = pts.sum(axis=0)
    pivot = sv / len(rows)
    radius = float(np.sqrt(np.max(np.sum((pts - pivot) ** 2, axis=1)))) if len(rows) else 0.0
    return pivot, radius, sv


def build_balltree(data, capacity: int = 30) -> Tree:
    """Top-down ball-tree: split by the two most spread-out seed points.

    Seed A is the covered point farthest from the node mean, seed B the point
    farthest from A; points go to the nearer seed (ties to A).  A node with
    at most ``capacity`` points, or whose points are all identical, becomes
    a leaf.
    """
    data = as_matrix(data)
    if capacity < 1:
        raise ContractError(f"capacity must be >= 1, got {capacity}")
    n = data.shape[0]
    indices = np.arange(n, dtype=np.int64)
    nodes: list[TreeNode] = []

    def build(start: int, end: int, height: int, parent_pivot) -> TreeNode:
        rows = indices[start:end]
        pivot, radius, sv = _node_stats(data, rows)
        shift = 0.0 if parent_pivot is None else float(np.linalg.norm(parent_pivot - pivot))
        node = TreeNode(len(nodes), pivot, radius, sv, len(rows), height, shift, start, end)
        nodes.append(node)
        if len(rows) <= capacity:
            return node
        pts = data[rows]
        d_mean = np.sqrt(np.sum((pts - pivot) ** 2, axis=1))
        a = int(np.argmax(d_mean))
        if d_mean[a] == 0.0:
            return node  # every covered point is identical
        d_a = np.sqrt(np.sum((pts - pts[a]) ** 2, axis=1))
        b = int(np.argmax(d_a))
        d_b = np.sqrt(np.sum((pts - pts[b]) ** 2, axis=1))
        to_a = d_a <= d_b
        left = rows[to_a]
        right = rows[~to_a]
        indices[start:start + len(left)] = left
        indices[start + len(left):end] = right
        mid = start + len(left)
        node.children = [
            build(start, mid, height + 1, pivot),
            build(mid, end, height + 1, pivot),
        ]
        return node

    root = build(0, n, 0, None)
    return Tree("ball", root, nodes, indices, data, capacity)


def build_kdtree(data, capacity: int = 1) -> Tree:
    """Median-split kd-tree on the widest-spread coordinate.

    Nodes carry the same statistics as ball-tree nodes plus tight bounding
    boxes.  The positional median split keeps recursion finite even when all
    coordinate values coincide.
    """
    data = as_matrix(data)
    if capacity < 1:
        raise ContractError(f"capacity must be >= 1, got {capacity}")
    n = data.shape[0]
    indices = np.arange(n, dtype=np.int64)
    nodes: list[TreeNode] = []

    def build(start: int, end: int, height: int, parent_pivot) -> TreeNode:
        rows = indices[start:end]
        pts = data[rows]
        pivot, radius, sv = _node_stats(data, rows)
        shift = 0.0 if parent_pivot is None else float(np.linalg.norm(parent_pivot - pivot))
        node = TreeNode(len(nodes), pivot, radius, sv, len(rows), height, shift, start, end,
                        box_lo=pts.min(axis=0), box_hi=pts.max(axis=0))
        nodes.append(node)
        if len(rows) <= capacity:
            return node
        axis = int(np.argmax(node.box_hi - node.box_lo))
        order = np.argsort(pts[:, axis], kind="stable")
        indices[start:end] = rows[order]
        mid = start + (len(rows) + 1) // 2
        node.children = [
            build(start, mid, height + 1, pivot),
            build(mid, end, height + 1, pivot),
        ]
        return node

    root = build(0, n, 0, None)
    return Tree("kd", root, nodes, indices, data, capacity)


def build_tree(data, kind: str = "ball", capacity: int = 30) -> Tree:
    if kind == "ball":
        return build_balltree(data, capacity)
    if kind == "kd":
        return build_kdtree(data, capacity)
    raise ContractError(f"unknown tree kind {kind!r}")


def balltree_node_test(node: TreeNode, c1: np.ndarray, c2: np.ndarray) -> bool:
    """True when every point under the node is strictly closer to c1 than c2.

    Uses only the pivot and radius: d(p, c1) + r < d(p, c2) - r.
    """
    d1 = float(np.linalg.norm(node.pivot - c1))
    d2 = float(np.linalg.norm(node.pivot - c2))
    return d1 + node.radius < d2 - node.radius


def kdtree_filter(node: TreeNode, centers: np.ndarray,
                  candidates: np.ndarray | None = None) -> np.ndarray:
    """Drop candidates no point in the node's box can be nearest to.

    The box-nearest candidate c* survives; any other candidate z is dropped
    when the whole box is strictly on c*'s side of their bisector.  The
    squared-distance difference g(x) = d^2(x, z) - d^2(x, c*) is affine in x,
    so its minimum over the box sits at the corner picked coordinate-wise by
    the sign of (z - c*); z is dropped iff that minimum is positive.  The
    true nearest centroid of every point in the box therefore always
    survives.
    """
    if node.box_lo is None or node.box_hi is None:
        raise ContractError("kdtree_filter needs a node with a bounding box")
    if candidates is None:
        candidates = np.arange(len(centers), dtype=np.int64)
    candidates = np.asarray(candidates, dtype=np.int64)
    if len(candidates) <= 1:
        return candidates
    cand_centers = centers[candidates]
    clamped = np.clip(cand_centers, node.box_lo, node.box_hi)
    box_d2 = np.sum((cand_centers - clamped) ** 2, axis=1)
    star = int(np.argmin(box_d2))
    c_star = cand_centers[star]
    keep = np.ones(len(candidates), dtype=bool)
    for i in range(len(candidates)):
        if i == star:
            continue
        z = cand_centers[i]
        diff = z - c_star
        corner = np.where(diff > 0, node.box_hi, node.box_lo)
        g = float(np.sum((corner - z) ** 2) - np.sum((corner - c_star) ** 2))
        if g > 0.0:
            keep[i] = False
    return candidates[keep]


def range_search(ctx: RunContext, tree: Tree, center: np.ndarray, radius: float):
    """All data points within ``radius`` of ``center``: (row indices, distances).

    A subtree is pruned when the ball around its pivot cannot intersect the
    query ball.  Leaf distances are returned so callers can filter strictly
    or reuse them.
    """
    if radius < 0:
        raise ContractError(f"radius must be non-negative, got {radius}")
    hit_rows: list[np.ndarray] = []
    hit_dists: list[np.ndarray] = []

    def visit(node: TreeNode):
        ctx.counters.node_accesses += 1
        dp = float(np.linalg.norm(center - node.pivot))
        ctx.counters.pivot_dist_comps += 1
        if dp > node.radius + radius:
            return
        if node.is_leaf:
            rows = tree.covered(node)
            pts = tree.data[rows]
            d = np.sqrt(np.sum((pts - center) ** 2, axis=1))
            ctx.counters.dist_comps += len(rows)
            ctx.counters.data_accesses += len(rows)
            inside = d <= radius
            hit_rows.append(rows[inside])
            hit_dists.append(d[inside])
            return
        for child in node.children:
            visit(child)

    visit(tree.root)
    if hit_rows:
        rows = np.concatenate(hit_rows)
        dists = np.concatenate(hit_dists)
    else:
        rows = np.empty(0, dtype=np.int64)
        dists = np.empty(0, dtype=np.float64)
    return rows, dists
