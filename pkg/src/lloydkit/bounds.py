"""Bound bookkeeping shared by the pruning strategies and the engine.

Distance bounds here come in four shapes: a per-point upper bound to the
assigned centroid, a single global lower bound on every other centroid, a
per-centroid lower bound vector, and per-group lower bounds.  After
centroids move, an upper bound inflates by the assigned centroid's drift and
a lower bound deflates by the drift of whatever it bounds (a centroid, a
group's worst mover, or the global worst mover).  Everything else in this
module derives candidate sets: centroids that survive a cheap geometric test
and still have to be compared against a point the hard way.

All tests downstream prune only on strict inequalities, so a pruned centroid
is provably strictly farther than the current best and can never steal an
assignment, not even through the lowest-index tie-break.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ContractError, RunContext, dist_center_pairs, pairwise_sq


# ---------------------------------------------------------------------------
# per-iteration centroid tables


def center_drifts(ctx: RunContext, old: np.ndarray, new: np.ndarray) -> np.ndarray:
    """How far each centroid moved in the last refinement."""
    d = np.sqrt(np.sum((new - old) ** 2, axis=1))
    ctx.counters.bound_dist_comps += len(old)
    return d


def inter_center(ctx: RunContext, centers: np.ndarray) -> np.ndarray:
    """Full centroid-to-centroid distance matrix (bound-side work)."""
    return dist_center_pairs(ctx, centers, centers)


def half_nearest_other(inter: np.ndarray) -> np.ndarray:
    """s(j) = half the distance from centroid j to its nearest other centroid."""
    masked = inter.copy()
    np.fill_diagonal(masked, np.inf)
    return 0.5 * masked.min(axis=1)


# ---------------------------------------------------------------------------
# candidate sets


def annulus_candidates(x_norm: float, center_norms: np.ndarray, norm_order: np.ndarray,
                       threshold: float) -> np.ndarray:
    """Centroids whose norm is within ``threshold`` of the point's norm.

    ``norm_order`` sorts the centroids by norm once per iteration; the
    annulus is then a binary-searched slice.  With threshold
    max(d(x, assigned), d(x, second-nearest)) the slice provably contains
    both the nearest and the second-nearest centroid, because the norm gap
    lower-bounds the distance.  Returned indices are ascending.
    """
    sorted_norms = center_norms[norm_order]
    lo = np.searchsorted(sorted_norms, x_norm - threshold, side="left")
    hi = np.searchsorted(sorted_norms, x_norm + threshold, side="right")
    out = norm_order[lo:hi]
    return np.sort(out)


def exponion_candidates(assigned: int, inter_row_sorted: np.ndarray,
                        inter_order: np.ndarray, radius: float) -> np.ndarray:
    """Centroids within ``radius`` of the assigned centroid.

    ``inter_row_sorted``/``inter_order`` are the assigned centroid's
    inter-centroid distances pre-sorted ascending.  With radius
    2*d(x, assigned) + drift(assigned) the ball contains the true nearest
    centroid of every point assigned there.  Ascending indices.
    """
    hi = np.searchsorted(inter_row_sorted, radius, side="right")
    out = inter_order[:hi]
    return np.sort(out)


def radius_candidates(inter_row: np.ndarray, cluster_radius: float) -> np.ndarray:
    """Centroids j with d(c_j, c) / 2 <= cluster radius, for a cluster at c.

    Shared by every member of the cluster: an excluded centroid is strictly
    farther than the assigned one for any point within the radius.  Always
    contains the cluster's own centroid.  Ascending indices.
    """
    return np.nonzero(inter_row <= 2.0 * cluster_radius)[0]


# ---------------------------------------------------------------------------
# drift variants


def drift_delta_2d(prev_center: np.ndarray, cluster_radius: float) -> float | None:
    """Closed-form 2-D drift estimate; None when its preconditions fail.

    delta = 2 * (c1 * ra - c2 * sqrt(|c|^2 - ra^2)) / |c|^2 for a previous
    centroid c = (c1, c2) and cluster radius ra.  Only defined in two
    dimensions with 0 <= ra <= |c| and |c| > 0; callers clamp the result
    against the true drift and never decay a bound by less than the true
    drift (the estimate alone does not warrant a tighter decay).
    """
    c = np.asarray(prev_center, dtype=np.float64)
    if c.shape != (2,):
        return None
    norm_sq = float(c[0] * c[0] + c[1] * c[1])
    if norm_sq <= 0.0 or cluster_radius < 0.0:
        return None
    rest = norm_sq - cluster_radius * cluster_radius
    if rest < 0.0:
        return None
    return float(2.0 * (c[0] * cluster_radius - c[1] * math.sqrt(rest)) / norm_sq)


def effective_drift_2d(prev_center: np.ndarray, cluster_radius: float,
                       true_drift: float) -> float:
    """min(|2-D estimate|, true drift), falling back to the true drift."""
    delta = drift_delta_2d(prev_center, cluster_radius)
    if delta is None:
        return true_drift
    return min(abs(delta), true_drift)


# ---------------------------------------------------------------------------
# block vectors


def block_starts(d: int, n_blocks: int) -> np.ndarray:
    """Start offsets of ``n_blocks`` near-equal contiguous blocks of d dims.

    Equivalent to zero-padding d up to a multiple of n_blocks: padding zeros
    change no block norm, so the ceil-sized front blocks give the same
    values.
    """
    if n_blocks < 1:
        raise ContractError(f"need at least one block, got {n_blocks}")
    n_blocks = min(n_blocks, d)
    size = math.ceil(d / n_blocks)
    starts = np.arange(0, d, size, dtype=np.int64)
    return starts


def block_norms(x: np.ndarray, n_blocks: int = 2) -> np.ndarray:
    """Per-block L2 norms of each row (rows of shape (d,) allowed).

    Storing norms rather than per-block means keeps the compressed inner
    product an upper bound of the true one (Cauchy-Schwarz per block), which
    is what makes the derived distance bound a valid lower bound.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    starts = block_starts(x.shape[1], n_blocks)
    sq = np.add.reduceat(x * x, starts, axis=1)
    return np.sqrt(sq)


def block_lower_bound(x_norm_sq, c_norm_sq, x_blocks, c_blocks):
    """sqrt(max(0, |x|^2 + |c|^2 - 2 <x_B, c_B>)): a lower bound on d(x, c).

    Broadcasts over rows of ``c_blocks``/``c_norm_sq``.
    """
    inner = c_blocks @ np.asarray(x_blocks, dtype=np.float64)
    val = x_norm_sq + c_norm_sq - 2.0 * inner
    return np.sqrt(np.maximum(val, 0.0))


# ---------------------------------------------------------------------------
# centroid grouping (for group bounds)


def group_centroids(centers: np.ndarray, t: int, seed: int = 0,
                    n_iters: int = 5) -> np.ndarray:
    """Partition k centroids into t groups by a small nested k-means.

    Runs uncounted (it clusters centroids, not data).  Returns group ids in
    [0, t).  Requires 1 <= t < k so group bounds have something to separate.
    """
    k = centers.shape[0]
    if not 1 <= t < k:
        raise ContractError(f"need 1 <= t < k, got t={t}, k={k}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(k, size=t, replace=False)
    means = centers[idx].copy()
    group_of = np.zeros(k, dtype=np.int64)
    for _ in range(n_iters):
        d2 = pairwise_sq(centers, means)
        group_of = np.argmin(d2, axis=1)
        for g in range(t):
            members = centers[group_of == g]
            if len(members):
                means[g] = members.mean(axis=0)
    return group_of


def regroup_pass(centers: np.ndarray, group_of: np.ndarray, t: int) -> np.ndarray:
    """One nearest-group-mean pass: the per-iteration regrouping step."""
    means = np.empty((t, centers.shape[1]), dtype=np.float64)
    empty = np.zeros(t, dtype=bool)
    for g in range(t):
        members = centers[group_of == g]
        if len(members):
            means[g] = members.mean(axis=0)
        else:
            empty[g] = True
            means[g] = 0.0
    d2 = pairwise_sq(centers, means)
    d2[:, empty] = np.inf
    return np.argmin(d2, axis=1)


def remap_group_bounds(lb_group: np.ndarray, old_of: np.ndarray, new_of: np.ndarray,
                       t: int) -> np.ndarray:
    """Rebuild per-point group bounds after a regroup.

    An old group's bound lower-bounds the distance to each of its members,
    so a new group's bound is the min of the old bounds of the old groups
    that contribute at least one member.
    """
    out = np.full((lb_group.shape[0], t), np.inf)
    for g_new in range(t):
        sources = np.unique(old_of[new_of == g_new])
        if len(sources):
            out[:, g_new] = lb_group[:, sources].min(axis=1)
    return out


# ---------------------------------------------------------------------------
# stored bound state + shadow validation


@dataclass
class BoundState:
    """The arrays a sequential strategy keeps between iterations.

    Only the layouts a strategy actually uses are allocated; the rest stay
    None.  The shadow validator checks whatever is present against true
    distances.
    """

    ub: np.ndarray | None = None                # (n,) upper bound to assigned
    lb_global: np.ndarray | None = None         # (n,) lower bound, all others
    lb_center: np.ndarray | None = None         # (n, k) per-centroid lower bounds
    lb_group: np.ndarray | None = None          # (n, t)
    group_of: np.ndarray | None = None          # (k,)
    sorted_vals: np.ndarray | None = None       # (n, b) ascending lower bounds
    sorted_idx: np.ndarray | None = None        # (n, b) centroid ids for sorted_vals
    rest_bound: np.ndarray | None = None        # (n,) bound on all unlisted others
    second_idx: np.ndarray | None = None        # (n,) second-nearest centroid id
    cluster_radius: np.ndarray | None = None    # (k,)
    point_norms: np.ndarray | None = None       # (n,)
    point_blocks: np.ndarray | None = None      # (n, B)
    point_norm_sq: np.ndarray | None = None     # (n,)
    heap_key: np.ndarray | None = None          # (n,) absolute heap keys
    heap_offset: np.ndarray | None = None       # (k,) per-cluster lazy offsets
    extras: dict = field(default_factory=dict)

    def footprint_floats(self) -> int:
        total = 0
        for name in ("ub", "lb_global", "lb_center", "lb_group", "sorted_vals",
                     "rest_bound", "cluster_radius", "point_norms", "point_blocks",
                     "point_norm_sq", "heap_key", "heap_offset"):
            arr = getattr(self, name)
            if arr is not None:
                total += arr.size
        return total


_VTOL_ABS = 1e-8
_VTOL_REL = 1e-9


def _tol(ref: np.ndarray) -> np.ndarray:
    return _VTOL_ABS + _VTOL_REL * np.abs(ref)


def validate_bounds(ctx: RunContext, data: np.ndarray, centers: np.ndarray,
                    assign: np.ndarray, state: BoundState, label: str, where: str):
    """Shadow-check stored bounds against exact distances; record violations.

    Called only in debug mode.  Uses uncounted kernels; a violation appends
    (label, where, kind, worst overshoot) to ctx.violations.
    """
    true = np.sqrt(pairwise_sq(data, centers))
    n = data.shape[0]
    rows = np.arange(n)
    d_assigned = true[rows, assign]

    def report(kind: str, excess: np.ndarray):
        worst = float(excess.max(initial=0.0))
        if worst > 0.0:
            ctx.violations.append((label, where, kind, worst))

    if state.ub is not None:
        report("ub", d_assigned - state.ub - _tol(d_assigned))
    others = true.copy()
    others[rows, assign] = np.inf
    d_second = others.min(axis=1)
    if state.lb_global is not None:
        report("lb_global", state.lb_global - d_second - _tol(d_second))
    if state.lb_center is not None:
        report("lb_center", (state.lb_center - true - _tol(true)).max(axis=1))
    if state.lb_group is not None and state.group_of is not None:
        t = state.lb_group.shape[1]
        for g in range(t):
            cols = np.nonzero(state.group_of == g)[0]
            if not len(cols):
                continue
            sub = others[:, cols]
            ref = sub.min(axis=1)
            report(f"lb_group[{g}]", state.lb_group[:, g] - ref - _tol(ref))
    if state.sorted_vals is not None and state.sorted_idx is not None:
        ref = np.take_along_axis(true, state.sorted_idx, axis=1)
        report("lb_sorted", (state.sorted_vals - ref - _tol(ref)).max(axis=1))
    if state.rest_bound is not None and state.sorted_idx is not None:
        masked = others.copy()
        np.put_along_axis(masked, state.sorted_idx, np.inf, axis=1)
        ref = masked.min(axis=1)
        finite = np.isfinite(ref)
        if finite.any():
            report("rest_bound", (state.rest_bound - ref - _tol(ref))[finite])
    if state.heap_key is not None and state.heap_offset is not None:
        adjusted = state.heap_key - state.heap_offset[assign]
        ref = d_second - d_assigned
        report("heap_gap", adjusted - ref - _tol(np.abs(ref) + d_assigned))
