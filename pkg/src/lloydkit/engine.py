"""The unified engine: one assignment loop over tree nodes and points.

A run keeps k cluster records (sum vector, count, owned objects).  Each
iteration polls objects; an object is a whole tree node or a single point
(a node of radius zero).  An object first tries to *stay* with its
reference centroid through stored bounds; failing that, its pivot is
measured against the candidate centroids that survive the configured bound
layers.  A node whose two nearest measured centroids are separated by more
than twice its radius is assigned wholesale; otherwise it splits and its
children inherit its bounds shifted by their pivot displacement.
Refinement divides each cluster's sum vector by its count and never touches
the data.

Knobs (KnobConfig):

* index_mode "none" delegates to the matching sequential strategy (or plain
  Lloyd); "pure" re-traverses the tree every iteration keeping nothing;
  "single" re-polls assigned objects inside their clusters; "multiple"
  re-enters from the root every iteration but keeps node bounds; "adaptive"
  times root entry (iteration 1) against cluster entry (iteration 2) and
  commits to the faster.
* bound_strategy picks the stored bound layers, mirroring the sequential
  strategies.
* use_search replaces both with the ball-tree range-search pre-assignment.

Every prune is strict, so engine assignments equal Lloyd's per iteration,
including the lowest-index tie-break.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import bounds as bnd
from .core import (
    ContractError,
    RunContext,
    as_matrix,
    dist_paired,
    dist_pivot_centers,
    dist_submatrix_fill,
    make_init,
    sse,
)
from .lloyd import IterationRecorder, RunResult, run_lloyd
from .pruners import _switch, run_pruner
from .tree import Tree, TreeNode, build_tree, kdtree_filter

INDEX_MODES = ("none", "pure", "single", "multiple", "adaptive")
BOUND_STRATEGIES = ("none", "elkan", "hamerly", "drake", "heap", "yinyang", "regroup",
                    "annulus", "exponion", "radius", "blockvec", "drift", "full")


@dataclass(frozen=True)
class KnobConfig:
    """Everything that selects an engine variant."""

    index_mode: str = "none"
    bound_strategy: str = "none"
    use_search: bool = False
    index_kind: str = "ball"
    capacity: int = 30
    t_max: int = 10
    seed: int = 0

    def validate(self) -> "KnobConfig":
        if self.index_mode not in INDEX_MODES:
            raise ContractError(f"index_mode must be one of {INDEX_MODES}")
        if self.bound_strategy not in BOUND_STRATEGIES:
            raise ContractError(f"bound_strategy must be one of {BOUND_STRATEGIES}")
        if self.index_kind not in ("ball", "kd"):
            raise ContractError("index_kind must be 'ball' or 'kd'")
        if self.capacity < 1:
            raise ContractError("capacity must be >= 1")
        if self.t_max < 0:
            raise ContractError("t_max must be >= 0")
        if self.index_mode == "pure" and self.bound_strategy != "none":
            raise ContractError("pure traversal keeps no bounds; use bound_strategy='none'")
        if self.use_search and (self.index_mode != "none" or self.bound_strategy != "none"):
            raise ContractError("search pre-assignment replaces both index and bounds")
        return self

    def label(self) -> str:
        if self.use_search:
            return "search"
        if self.index_mode == "none":
            return self.bound_strategy if self.bound_strategy != "none" else "lloyd"
        tag = f"{self.index_kind}-{self.index_mode}"
        if self.bound_strategy != "none":
            tag += f"+{self.bound_strategy}"
        return tag


@dataclass(frozen=True)
class Profile:
    """Which bound layers a strategy keeps inside the engine.

    The heap strategy's bound content is the global gap, so its profile
    matches the plain one; its priority-queue ordering lives only in the
    sequential implementation (a Python heap per cluster would be slower
    than the vectorized gate here).  The 2-D drift variant shares the
    per-centroid layout; the engine always decays by true drifts.
    """

    gate_s: bool = False
    per_center: bool = False
    groups: str | None = None
    filters: tuple = ()
    block: bool = False


PROFILES = {
    "none": Profile(),
    "heap": Profile(),
    "elkan": Profile(gate_s=True, per_center=True),
    "drift": Profile(gate_s=True, per_center=True),
    "drake": Profile(per_center=True),
    "hamerly": Profile(gate_s=True),
    "yinyang": Profile(groups="static"),
    "regroup": Profile(groups="regroup"),
    "annulus": Profile(filters=("annulus",)),
    "exponion": Profile(gate_s=True, filters=("exponion",)),
    "radius": Profile(filters=("radius",)),
    "blockvec": Profile(block=True),
    "full": Profile(gate_s=True, per_center=True, groups="static",
                    filters=("annulus", "exponion", "radius"), block=True),
}


class ClusterRecords:
    """Per-cluster sum vectors and counts; the refinement inputs."""

    def __init__(self, k: int, d: int):
        self.sums = np.zeros((k, d))
        self.nums = np.zeros(k, dtype=np.int64)

    def add_node(self, node: TreeNode, c: int):
        self.sums[c] += node.sum_vec
        self.nums[c] += node.num

    def remove_node(self, node: TreeNode, c: int):
        self.sums[c] -= node.sum_vec
        self.nums[c] -= node.num

    def add_points(self, pts: np.ndarray, c: int):
        if len(pts):
            self.sums[c] += pts.sum(axis=0)
            self.nums[c] += len(pts)

    def remove_points(self, pts: np.ndarray, c: int):
        if len(pts):
            self.sums[c] -= pts.sum(axis=0)
            self.nums[c] -= len(pts)

    def reset(self):
        self.sums[:] = 0.0
        self.nums[:] = 0


def incremental_refine(records: ClusterRecords, prev_centers: np.ndarray) -> np.ndarray:
    """New centroids from sums and counts alone: zero data accesses.

    Clusters with no members keep their previous centroid.
    """
    out = prev_centers.copy()
    nz = records.nums > 0
    out[nz] = records.sums[nz] / records.nums[nz, None]
    return out


@dataclass
class NodeRec:
    """Stored bounds for a node; ``a`` is the centroid they reference."""

    a: int
    ub: float
    lb_g: float
    lb_center: np.ndarray | None = None
    lb_group: np.ndarray | None = None


def node_stay_test(rec: NodeRec, radius: float, s_half: np.ndarray | None) -> bool:
    """True when every covered point provably keeps rec.a (strictly)."""
    lb = rec.lb_g
    if rec.lb_center is not None:
        others = np.delete(rec.lb_center, rec.a)
        if len(others):
            lb = max(lb, float(others.min()))
    if rec.lb_group is not None and len(rec.lb_group):
        lb = max(lb, float(rec.lb_group.min()))
    if lb - radius > rec.ub + radius:
        return True
    return s_half is not None and s_half[rec.a] > rec.ub + radius


def inherit_rec(rec: NodeRec, shift: float) -> NodeRec:
    """Child bounds from parent bounds: ub grows, lower bounds shrink (>= 0)."""
    return NodeRec(
        a=rec.a,
        ub=rec.ub + shift,
        lb_g=max(rec.lb_g - shift, 0.0),
        lb_center=None if rec.lb_center is None else np.maximum(rec.lb_center - shift, 0.0),
        lb_group=None if rec.lb_group is None else np.maximum(rec.lb_group - shift, 0.0),
    )


def node_assignable(d1: float, d2: float, radius: float) -> bool:
    """Whole-node assignment: second-nearest beats nearest by more than 2r."""
    return d2 - d1 > 2.0 * radius


class _PointBounds:
    """Struct-of-arrays bounds for points handled individually."""

    def __init__(self, n: int, k: int, profile: Profile, t: int):
        self.has = np.zeros(n, dtype=bool)
        self.ref = np.zeros(n, dtype=np.int64)
        self.ub = np.zeros(n)
        self.lb_g = np.zeros(n)
        self.lb_center = np.zeros((n, k)) if profile.per_center else None
        self.lb_group = np.zeros((n, t)) if profile.groups else None

    def decay(self, drifts: np.ndarray, group_drift: np.ndarray | None):
        m = self.has
        if not m.any():
            return
        self.ub[m] += drifts[self.ref[m]]
        if len(drifts) > 1:
            top = int(np.argmax(drifts))
            rest = np.delete(drifts, top)
            second = float(rest.max()) if len(rest) else 0.0
            other = np.where(self.ref[m] == top, second, drifts[top])
            self.lb_g[m] -= other
        if self.lb_center is not None:
            self.lb_center[m] = np.maximum(self.lb_center[m] - drifts[None, :], 0.0)
        if self.lb_group is not None and group_drift is not None:
            self.lb_group[m] = np.maximum(self.lb_group[m] - group_drift[None, :], 0.0)

    def seed_from_node(self, rows: np.ndarray, rec: NodeRec, radius: float):
        """First bounds for fresh points: the covering node's, widened by r."""
        fresh = rows[~self.has[rows]]
        if not len(fresh):
            return
        self.has[fresh] = True
        self.ref[fresh] = rec.a
        self.ub[fresh] = rec.ub + radius
        self.lb_g[fresh] = max(rec.lb_g - radius, 0.0)
        if self.lb_center is not None:
            base = rec.lb_center if rec.lb_center is not None else np.zeros(self.lb_center.shape[1])
            self.lb_center[fresh] = np.maximum(base - radius, 0.0)[None, :]
        if self.lb_group is not None:
            base = rec.lb_group if rec.lb_group is not None else np.zeros(self.lb_group.shape[1])
            self.lb_group[fresh] = np.maximum(base - radius, 0.0)[None, :]


class EngineRun:
    """One bounded-engine execution; run_engine is the public entry point."""

    def __init__(self, data: np.ndarray, k: int, config: KnobConfig,
                 init: np.ndarray, ctx: RunContext):
        self.data = data
        self.n, self.d = data.shape
        self.k = k
        self.config = config
        self.ctx = ctx
        self.profile = PROFILES[config.bound_strategy]
        self.centers = init.copy()
        self.init_copy = init.copy()

        t0 = time.perf_counter_ns()
        self.tree: Tree = build_tree(data, config.index_kind, config.capacity)
        self.build_nanos = time.perf_counter_ns() - t0

        if self.profile.groups and k >= 2:
            self.t_groups = min(max(1, math.ceil(k / 10)), k - 1)
            self.group_of = bnd.group_centroids(self.centers, self.t_groups,
                                                seed=config.seed)
        else:
            self.t_groups = 1
            self.group_of = np.zeros(k, dtype=np.int64)

        self.recs: dict[int, NodeRec] = {}
        self.node_owner: dict[int, int] = {}
        self.pt_owner = np.full(self.n, -1, dtype=np.int64)
        self.records = ClusterRecords(k, self.d)
        self.pts = _PointBounds(self.n, k, self.profile, self.t_groups)
        self.out = np.full(self.n, -1, dtype=np.int64)

        self.drifts = np.zeros(k)
        self.group_drift = np.zeros(self.t_groups)
        self.inter = None
        self.s_half = None
        self.inter_order = None
        self.inter_sorted = None
        self.center_norms = None
        self.norm_order = None
        self.center_blocks = None
        self.center_norm_sq = None
        self.point_norms = None
        self.point_blocks = None
        self.point_norm_sq = None
        self.cluster_ra = np.full(k, -np.inf)
        self.mode_resolved = config.index_mode
        self._old_centers = self.centers

    # ---------------------------------------------------------------- tables

    def _iteration_tables(self, first: bool):
        p = self.profile
        if p.gate_s or "exponion" in p.filters or "radius" in p.filters:
            self.inter = bnd.inter_center(self.ctx, self.centers)
            self.s_half = bnd.half_nearest_other(self.inter) if p.gate_s else None
            if "exponion" in p.filters:
                self.inter_order = np.argsort(self.inter, axis=1, kind="stable")
                self.inter_sorted = np.take_along_axis(self.inter, self.inter_order, axis=1)
        if "annulus" in p.filters:
            self.center_norms = np.sqrt(np.sum(self.centers ** 2, axis=1))
            self.norm_order = np.argsort(self.center_norms, kind="stable")
            if self.point_norms is None:
                self.point_norms = np.sqrt(np.sum(self.data ** 2, axis=1))
            self.ctx.counters.bound_updates += self.k
        if p.block:
            self.center_blocks = bnd.block_norms(self.centers, 2)
            self.center_norm_sq = np.sum(self.centers ** 2, axis=1)
            if self.point_blocks is None:
                self.point_blocks = bnd.block_norms(self.data, 2)
                self.point_norm_sq = np.sum(self.data ** 2, axis=1)
            self.ctx.counters.bound_updates += self.center_blocks.size
        if "radius" in p.filters:
            ra = np.full(self.k, -np.inf)
            m = self.pts.has & (self.pt_owner >= 0)
            if m.any():
                np.maximum.at(ra, self.pts.ref[m], self.pts.ub[m])
            for nid, c in self.node_owner.items():
                ra[c] = max(ra[c], self.recs[nid].ub + self.tree.nodes[nid].radius)
            self.cluster_ra = ra
        if p.groups == "regroup" and not first and self.k >= 2:
            new_of = bnd.regroup_pass(self.centers, self.group_of, self.t_groups)
            self.ctx.counters.bound_dist_comps += self.k * self.t_groups
            if not np.array_equal(new_of, self.group_of):
                if self.pts.lb_group is not None and self.pts.has.any():
                    self.pts.lb_group = bnd.remap_group_bounds(
                        self.pts.lb_group, self.group_of, new_of, self.t_groups)
                for rec in self.recs.values():
                    if rec.lb_group is not None:
                        rec.lb_group = bnd.remap_group_bounds(
                            rec.lb_group[None, :], self.group_of, new_of, self.t_groups)[0]
                self.group_of = new_of

    def _decay_all(self):
        self.drifts = bnd.center_drifts(self.ctx, self._old_centers, self.centers)
        if self.profile.groups:
            self.group_drift = np.zeros(self.t_groups)
            np.maximum.at(self.group_drift, self.group_of, self.drifts)
        self.pts.decay(self.drifts, self.group_drift if self.profile.groups else None)
        if len(self.drifts) > 1:
            top = int(np.argmax(self.drifts))
            rest = np.delete(self.drifts, top)
            second = float(rest.max()) if len(rest) else 0.0
        else:
            top, second = 0, 0.0
        for rec in self.recs.values():
            rec.ub += self.drifts[rec.a]
            rec.lb_g -= second if rec.a == top else float(self.drifts[top])
            if rec.lb_center is not None:
                rec.lb_center = np.maximum(rec.lb_center - self.drifts, 0.0)
            if rec.lb_group is not None:
                rec.lb_group = np.maximum(rec.lb_group - self.group_drift, 0.0)
        self.ctx.counters.bound_updates += 2 * len(self.recs) + int(self.pts.has.sum())

    # ------------------------------------------------------------ candidates

    def _candidate_set(self, ref: int, ub_e: float, radius: float,
                       x_norm: float | None):
        """Apply the profile's candidate filters around reference ``ref``.

        Returns (candidates, floors): ascending candidate indices always
        containing ref, plus valid lower bounds on the pivot distance to
        every excluded centroid.  Each exclusion also proves the centroid
        strictly loses to ref for every point within ``radius`` of the
        pivot, which is what keeps wholesale assignment exact.
        """
        p = self.profile
        cand = np.arange(self.k)
        floors: list[float] = []
        if "radius" in p.filters:
            ra = float(self.cluster_ra[ref])
            if np.isfinite(ra) and ub_e + radius <= ra:
                sub = bnd.radius_candidates(self.inter[ref], ra)
                if len(sub) < len(cand):
                    floors.append(2.0 * ra - ub_e)
                    cand = sub
        if "exponion" in p.filters:
            ring = 2.0 * (ub_e + radius) + float(self.drifts[ref])
            sub = bnd.exponion_candidates(ref, self.inter_sorted[ref],
                                          self.inter_order[ref], ring)
            if len(sub) < self.k:
                floors.append(ring - ub_e)
                cand = np.intersect1d(cand, sub, assume_unique=True)
        if "annulus" in p.filters and x_norm is not None:
            thr = ub_e + 2.0 * radius
            sub = bnd.annulus_candidates(x_norm, self.center_norms, self.norm_order, thr)
            if len(sub) < self.k:
                floors.append(thr)
                cand = np.intersect1d(cand, sub, assume_unique=True)
        if ref not in cand:
            cand = np.sort(np.append(cand, ref))
        return cand, floors

    # ------------------------------------------------------------- node pass

    def _scan_node(self, node: TreeNode, rec_in: NodeRec | None):
        """Measure the pivot against surviving candidates.

        Returns (rec_new, gap) where gap is second minus first over the
        measured distances; inf means nothing but the reference survived,
        in which case every covered point provably stays with it.
        """
        ctx = self.ctx
        p = self.profile
        pivot = node.pivot
        r = node.radius
        ref = rec_in.a if rec_in is not None else 0
        ub_e = float(dist_pivot_centers(ctx, pivot, self.centers[ref:ref + 1])[0])

        x_norm = float(np.linalg.norm(pivot)) if "annulus" in p.filters else None
        cand, floors = self._candidate_set(ref, ub_e, r, x_norm)

        if p.groups and rec_in is not None and rec_in.lb_group is not None:
            keep = []
            for j in cand.tolist():
                g = self.group_of[j]
                if j != ref and rec_in.lb_group[g] - r > ub_e + r:
                    floors.append(float(rec_in.lb_group[g]))
                else:
                    keep.append(j)
            cand = np.array(keep, dtype=np.int64)
            ctx.counters.bound_accesses += len(cand)
        if p.per_center and rec_in is not None and rec_in.lb_center is not None:
            keep = []
            for j in cand.tolist():
                if j != ref and rec_in.lb_center[j] - r > ub_e + r:
                    floors.append(float(rec_in.lb_center[j]))
                else:
                    keep.append(j)
            cand = np.array(keep, dtype=np.int64)
            ctx.counters.bound_accesses += len(cand)
        if p.gate_s and self.inter is not None:
            keep = []
            for j in cand.tolist():
                if j != ref and self.inter[ref, j] > 2.0 * (ub_e + 2.0 * r):
                    floors.append(float(self.inter[ref, j]) - ub_e)
                else:
                    keep.append(j)
            cand = np.array(keep, dtype=np.int64)

        others = cand[cand != ref]
        if p.block and len(others):
            pb = bnd.block_norms(pivot, 2)[0]
            pn = float(np.sum(pivot ** 2))
            ob = bnd.block_lower_bound(pn, self.center_norm_sq[others],
                                       pb, self.center_blocks[others])
            ctx.counters.bound_updates += len(others)
            measure = ob <= ub_e + 2.0 * r
            floors.extend(ob[~measure].tolist())
            others = others[measure]
        d_others = (dist_pivot_centers(ctx, pivot, self.centers[others])
                    if len(others) else np.empty(0))

        best_d, best_j = ub_e, ref
        second = np.inf
        for dj, j in sorted(zip(d_others.tolist(), others.tolist())):
            if dj < best_d or (dj == best_d and j < best_j):
                second = best_d
                best_d, best_j = dj, j
            elif dj < second:
                second = dj

        lb_floor = min(floors) if floors else np.inf
        rec = NodeRec(a=best_j, ub=best_d, lb_g=min(second, lb_floor))
        if p.per_center:
            base = (rec_in.lb_center.copy()
                    if rec_in is not None and rec_in.lb_center is not None
                    else np.full(self.k, min(lb_floor, 0.0) if not floors else lb_floor))
            base[others] = d_others
            base[ref] = ub_e
            rec.lb_center = base
        if p.groups:
            base = (rec_in.lb_group.copy()
                    if rec_in is not None and rec_in.lb_group is not None
                    else np.full(self.t_groups, lb_floor))
            not_best = others != best_j
            ex_j = others[not_best]
            ex_v = d_others[not_best]
            if ref != best_j:
                ex_j = np.append(ex_j, ref)
                ex_v = np.append(ex_v, ub_e)
            grp_min = np.full(self.t_groups, np.inf)
            if len(ex_j):
                np.minimum.at(grp_min, self.group_of[ex_j], ex_v)
            rec.lb_group = np.minimum(base, grp_min)
        ctx.counters.bound_updates += 2
        return rec, second - best_d

    def _proc_node(self, node: TreeNode, inherited: NodeRec | None,
                   fresh_rows: list[np.ndarray]):
        """Assign, keep, or split one node (recursively)."""
        ctx = self.ctx
        ctx.counters.node_accesses += 1
        rec = self.recs.get(node.node_id, inherited)
        r = node.radius
        if rec is not None:
            ctx.counters.bound_accesses += 2
            if node_stay_test(rec, r, self.s_half):
                self._own_node(node, rec)
                return
        rec_new, gap = self._scan_node(node, rec)
        if node_assignable(0.0, gap, r):
            self._own_node(node, rec_new)
            return
        self.recs.pop(node.node_id, None)
        prev = self.node_owner.pop(node.node_id, None)
        if prev is not None:
            self.records.remove_node(node, prev)
        if node.is_leaf:
            rows = self.tree.covered(node)
            self.pts.seed_from_node(rows, rec_new, r)
            fresh_rows.append(rows)
            return
        for child in node.children:
            self._proc_node(child, inherit_rec(rec_new, child.parent_shift), fresh_rows)

    def _own_node(self, node: TreeNode, rec: NodeRec):
        """Materialize a wholesale assignment and fix the cluster records."""
        nid = node.node_id
        prev = self.node_owner.get(nid)
        self.recs[nid] = rec
        if prev == rec.a:
            self.out[self.tree.covered(node)] = rec.a
            return
        if prev is not None:
            self.records.remove_node(node, prev)
        self.node_owner[nid] = rec.a
        self.records.add_node(node, rec.a)
        self.out[self.tree.covered(node)] = rec.a

    # ------------------------------------------------------------ point pass

    def _point_phase(self, rows: np.ndarray):
        """Gate, tighten, and scan points individually (vectorized)."""
        if not len(rows):
            return
        ctx = self.ctx
        p = self.profile
        pts = self.pts
        ref = pts.ref[rows]
        gate_lb = pts.lb_g[rows].copy()
        if pts.lb_center is not None:
            masked = pts.lb_center[rows].copy()
            masked[np.arange(len(rows)), ref] = np.inf
            gate_lb = np.maximum(gate_lb, masked.min(axis=1))
        if pts.lb_group is not None:
            gate_lb = np.maximum(gate_lb, pts.lb_group[rows].min(axis=1))
        if p.gate_s and self.s_half is not None:
            gate_lb = np.maximum(gate_lb, self.s_half[ref])
        ctx.counters.bound_accesses += 2 * len(rows)

        stay = gate_lb > pts.ub[rows]
        self._settle(rows[stay])
        active = rows[~stay]
        if not len(active):
            return
        d_ref = dist_paired(ctx, self.data[active], self.centers[pts.ref[active]])
        pts.ub[active] = d_ref
        gate2 = gate_lb[~stay] > d_ref
        self._settle(active[gate2])
        work = active[~gate2]
        if not len(work):
            return
        if p.per_center:
            self._scan_points_center(work)
        elif p.groups:
            self._scan_points_groups(work)
        elif p.filters:
            self._scan_points_filtered(work)
        elif p.block:
            self._scan_points_block(work)
        else:
            self._scan_points_plain(work)

    def _settle(self, rows: np.ndarray):
        """Points whose stay test held: assignment is their reference."""
        if len(rows):
            self.out[rows] = self.pts.ref[rows]
            self._reown_points(rows, self.pts.ref[rows])

    def _finish_points(self, rows: np.ndarray, best_d, best_j, lb_g):
        pts = self.pts
        pts.ub[rows] = best_d
        pts.lb_g[rows] = lb_g
        pts.ref[rows] = best_j
        self.out[rows] = best_j
        self._reown_points(rows, best_j)
        self.ctx.counters.bound_updates += 3 * len(rows)

    def _reown_points(self, rows: np.ndarray, to: np.ndarray):
        prev = self.pt_owner[rows]
        to = np.broadcast_to(to, prev.shape)
        move = prev != to
        if not move.any():
            return
        rows_m, to_m, prev_m = rows[move], to[move], prev[move]
        for c in np.unique(prev_m):
            if c >= 0:
                self.records.remove_points(self.data[rows_m[prev_m == c]], int(c))
        for c in np.unique(to_m):
            self.records.add_points(self.data[rows_m[to_m == c]], int(c))
        self.pt_owner[rows_m] = to_m

    def _scan_points_plain(self, work: np.ndarray):
        pts = self.pts
        d = dist_submatrix_fill(self.ctx, self.data[work], self.centers,
                                pts.ref[work], pts.ub[work])
        best_j = np.argmin(d, axis=1).astype(np.int64)
        rows_local = np.arange(len(work))
        d1 = d[rows_local, best_j].copy()
        d[rows_local, best_j] = np.inf
        d2 = d.min(axis=1)
        self._finish_points(work, d1, best_j, d2)

    def _scan_points_center(self, work: np.ndarray):
        pts = self.pts
        a0 = pts.ref[work]
        best_d = pts.ub[work].copy()
        best_j = a0.copy()
        for j in range(self.k):
            mask = (a0 != j) & (pts.lb_center[work, j] <= best_d)
            if self.s_half is not None:
                mask &= 0.5 * self.inter[best_j, j] <= best_d
            self.ctx.counters.bound_accesses += len(work)
            rows = np.nonzero(mask)[0]
            if not len(rows):
                continue
            dj = np.sqrt(np.sum((self.data[work[rows]] - self.centers[j]) ** 2, axis=1))
            self.ctx.counters.dist_comps += len(rows)
            self.ctx.counters.data_accesses += len(rows)
            pts.lb_center[work[rows], j] = dj
            sw = _switch(best_d[rows], best_j[rows], dj, j)
            best_d[rows[sw]] = dj[sw]
            best_j[rows[sw]] = j
        masked = pts.lb_center[work].copy()
        masked[np.arange(len(work)), best_j] = np.inf
        lb_g = masked.min(axis=1)
        self._finish_points(work, best_d, best_j, lb_g)

    def _scan_points_groups(self, work: np.ndarray):
        pts = self.pts
        a0 = pts.ref[work]
        d_assigned = pts.ub[work].copy()
        best_d = d_assigned.copy()
        best_j = a0.copy()
        scanned = []
        for g in range(self.t_groups):
            cols = np.nonzero(self.group_of == g)[0]
            if not len(cols):
                continue
            mask = pts.lb_group[work, g] <= best_d
            self.ctx.counters.bound_accesses += len(work)
            rows = np.nonzero(mask)[0]
            if not len(rows):
                continue
            sel = work[rows]
            pos = np.minimum(np.searchsorted(cols, a0[rows]), len(cols) - 1)
            fill = np.where(cols[pos] == a0[rows], pos, -1).astype(np.int64)
            d_g = dist_submatrix_fill(self.ctx, self.data[sel], self.centers[cols],
                                      fill, d_assigned[rows])
            loc = np.argmin(d_g, axis=1)
            d_min = d_g[np.arange(len(rows)), loc]
            j_min = cols[loc]
            sw = _switch(best_d[rows], best_j[rows], d_min, j_min)
            best_d[rows[sw]] = d_min[sw]
            best_j[rows[sw]] = j_min[sw]
            scanned.append((g, rows, cols, d_g))
        for g, rows, cols, d_g in scanned:
            masked = np.where(cols[None, :] == best_j[rows][:, None], np.inf, d_g)
            pts.lb_group[work[rows], g] = masked.min(axis=1)
        moved = np.nonzero(best_j != a0)[0]
        if len(moved):
            g_old = self.group_of[a0[moved]]
            cur = pts.lb_group[work[moved], g_old]
            pts.lb_group[work[moved], g_old] = np.minimum(cur, d_assigned[moved])
        lb_g = pts.lb_group[work].min(axis=1)
        self._finish_points(work, best_d, best_j, lb_g)

    def _scan_points_block(self, work: np.ndarray):
        pts = self.pts
        a0 = pts.ref[work]
        inner = self.point_blocks[work] @ self.center_blocks.T
        low = np.sqrt(np.maximum(
            self.point_norm_sq[work][:, None] + self.center_norm_sq[None, :] - 2.0 * inner,
            0.0,
        ))
        self.ctx.counters.bound_updates += low.size
        effective = low.copy()
        rows_local = np.arange(len(work))
        effective[rows_local, a0] = pts.ub[work]
        best_d = pts.ub[work].copy()
        best_j = a0.copy()
        for j in range(self.k):
            mask = (a0 != j) & (low[:, j] <= best_d)
            rows = np.nonzero(mask)[0]
            if not len(rows):
                continue
            dj = np.sqrt(np.sum((self.data[work[rows]] - self.centers[j]) ** 2, axis=1))
            self.ctx.counters.dist_comps += len(rows)
            self.ctx.counters.data_accesses += len(rows)
            effective[rows, j] = dj
            sw = _switch(best_d[rows], best_j[rows], dj, j)
            best_d[rows[sw]] = dj[sw]
            best_j[rows[sw]] = j
        effective[rows_local, best_j] = np.inf
        lb_g = effective.min(axis=1)
        self._finish_points(work, best_d, best_j, lb_g)

    def _scan_points_filtered(self, work: np.ndarray):
        pts = self.pts
        p = self.profile
        best_d = np.empty(len(work))
        best_j = np.empty(len(work), dtype=np.int64)
        lb_gs = np.empty(len(work))
        for idx, i in enumerate(work.tolist()):
            ref = int(pts.ref[i])
            ub_e = float(pts.ub[i])
            x_norm = float(self.point_norms[i]) if "annulus" in p.filters else None
            cand, floors = self._candidate_set(ref, ub_e, 0.0, x_norm)
            others = cand[cand != ref]
            bd, bj = ub_e, ref
            second = np.inf
            if len(others):
                d_o = np.sqrt(np.sum((self.centers[others] - self.data[i]) ** 2, axis=1))
                self.ctx.counters.dist_comps += len(others)
                self.ctx.counters.data_accesses += len(others)
                for dj, j in sorted(zip(d_o.tolist(), others.tolist())):
                    if dj < bd or (dj == bd and j < bj):
                        second = bd
                        bd, bj = dj, j
                    elif dj < second:
                        second = dj
            floor = min(floors) if floors else np.inf
            best_d[idx], best_j[idx] = bd, bj
            lb_gs[idx] = min(second, floor)
        self._finish_points(work, best_d, best_j, lb_gs)

    # -------------------------------------------------------------- iterate

    def _check_conservation(self, where: str):
        label = self.config.label()
        total = int(self.records.nums.sum())
        if total != self.n:
            self.ctx.violations.append((label, where, "conservation", float(total - self.n)))
        ref_sum = self.data.sum(axis=0)
        drift = float(np.max(np.abs(self.records.sums.sum(axis=0) - ref_sum)))
        scale = max(1.0, float(np.max(np.abs(ref_sum))))
        if drift > 1e-6 * scale:
            self.ctx.violations.append((label, where, "mass", drift))
        if (self.out < 0).any():
            self.ctx.violations.append((label, where, "unassigned", float((self.out < 0).sum())))

    def run(self, t_max: int, recorder: IterationRecorder) -> bool:
        converged = False
        mode = self.config.index_mode
        assign_nanos = [0, 0]
        for t in range(1, t_max + 1):
            if t > 1:
                self._decay_all()
            self._iteration_tables(first=(t == 1))
            prev_out = self.out.copy()
            recorder.start_assign()

            if t == 1:
                from_root = True
            elif mode == "single":
                from_root = False
            elif mode == "multiple":
                from_root = True
            else:
                from_root = False if t == 2 else self.mode_resolved == "multiple"

            fresh_rows: list[np.ndarray] = []
            if from_root:
                self.node_owner.clear()
                self.pt_owner[:] = -1
                self.records.reset()
                self._proc_node(self.tree.root, None, fresh_rows)
                parts = [r for r in fresh_rows if len(r)]
            else:
                for nid in sorted(self.node_owner):
                    self._proc_node(self.tree.nodes[nid], None, fresh_rows)
                indiv = np.nonzero(self.pt_owner >= 0)[0]
                parts = [r for r in fresh_rows if len(r)] + [indiv]
            rows = (np.unique(np.concatenate(parts)) if parts
                    else np.empty(0, dtype=np.int64))
            self._point_phase(rows)
            recorder.end_assign()

            changed = int(np.count_nonzero(self.out != prev_out))
            if self.ctx.debug_validate:
                self._check_conservation(f"iter{t}")
            self._old_centers = self.centers
            self.centers = incremental_refine(self.records, self.centers)
            recorder.end_iteration(self.out, changed,
                                   sse(self.data, self.centers, self.out))
            if mode == "adaptive" and t <= 2:
                assign_nanos[t - 1] = recorder.stats[-1].assign_nanos
                if t == 2:
                    self.mode_resolved = ("single" if assign_nanos[0] >= assign_nanos[1]
                                          else "multiple")
            if changed == 0:
                converged = True
                break
        return converged


def run_engine(data, k: int, config: KnobConfig, *, init=None,
               init_method: str = "kmeanspp", ctx: RunContext | None = None) -> RunResult:
    """Run k-means under one knob configuration; Lloyd-identical assignments."""
    config.validate()
    ctx = ctx or RunContext(seed=config.seed)
    data = as_matrix(data)
    n = data.shape[0]
    if init is None:
        init = make_init(ctx, data, k, init_method)
    init = np.array(init, dtype=np.float64, copy=True)
    if init.shape != (k, data.shape[1]):
        raise ValueError(f"init shape {init.shape} does not match (k={k}, d={data.shape[1]})")

    if config.use_search:
        res = run_pruner(data, k, "search", init=init, t_max=config.t_max,
                         capacity=config.capacity, ctx=ctx)
        res.label = config.label()
        return res
    if config.index_mode == "none":
        if config.bound_strategy == "none":
            res = run_lloyd(data, k, init=init, t_max=config.t_max, ctx=ctx)
        else:
            res = run_pruner(data, k, config.bound_strategy, init=init,
                             t_max=config.t_max, ctx=ctx)
        res.label = config.label()
        return res
    if k == 1:
        res = run_lloyd(data, k, init=init, t_max=config.t_max, ctx=ctx)
        res.label = config.label()
        return res
    if config.index_mode == "pure":
        return _run_pure(data, k, config, init, ctx)

    engine = EngineRun(data, k, config, init, ctx)
    rec = IterationRecorder(ctx, n, k)
    converged = engine.run(config.t_max, rec)
    return RunResult(
        centroids=engine.centers,
        assign=engine.out,
        iterations=rec.stats,
        assign_history=rec.history,
        counters=ctx.counters,
        converged=converged,
        init_centroids=engine.init_copy,
        label=config.label(),
        build_nanos=engine.build_nanos,
        extra={"mode_resolved": engine.mode_resolved},
    )


def _run_pure(data: np.ndarray, k: int, config: KnobConfig, init: np.ndarray,
              ctx: RunContext) -> RunResult:
    """Tree traversal with no memory between iterations (and no bounds).

    Candidates shrink on the way down: a centroid is dropped for a subtree
    when it cannot beat the node's nearest candidate anywhere inside the
    node's ball (or box, for the kd variant).  A node whose nearest two
    candidates are separated by more than twice its radius takes the whole
    subtree; refinement then uses its precomputed sum vector.
    """
    n, d = data.shape
    t0 = time.perf_counter_ns()
    tree = build_tree(data, config.index_kind, config.capacity)
    build_nanos = time.perf_counter_ns() - t0
    centers = init.copy()
    out = np.full(n, -1, dtype=np.int64)
    rec = IterationRecorder(ctx, n, k)
    records = ClusterRecords(k, d)
    converged = False

    def visit(node: TreeNode, cand: np.ndarray):
        ctx.counters.node_accesses += 1
        dp = dist_pivot_centers(ctx, node.pivot, centers[cand])
        loc = int(np.argmin(dp))
        d1 = float(dp[loc])
        j1 = int(cand[loc])
        d2 = float(np.partition(dp, 1)[1]) if len(cand) > 1 else np.inf
        if node_assignable(d1, d2, node.radius):
            out[tree.covered(node)] = j1
            records.add_node(node, j1)
            return
        sub = cand[dp <= d1 + 2.0 * node.radius]
        if node.is_leaf:
            rows = tree.covered(node)
            diff = data[rows][:, None, :] - centers[sub][None, :, :]
            dm = np.sqrt(np.sum(diff * diff, axis=2))
            ctx.counters.dist_comps += dm.size
            ctx.counters.data_accesses += dm.size
            assign = sub[np.argmin(dm, axis=1)]
            out[rows] = assign
            for c in np.unique(assign):
                records.add_points(data[rows[assign == c]], int(c))
            return
        for child in node.children:
            cc = sub
            if tree.kind == "kd" and len(cc) > 1:
                cc = kdtree_filter(child, centers, cc)
                ctx.counters.bound_accesses += len(sub)
            visit(child, cc)

    for _ in range(config.t_max):
        rec.start_assign()
        prev_out = out.copy()
        records.reset()
        visit(tree.root, np.arange(k))
        rec.end_assign()
        changed = int(np.count_nonzero(out != prev_out))
        centers = incremental_refine(records, centers)
        rec.end_iteration(out, changed, sse(data, centers, out))
        if changed == 0:
            converged = True
            break

    return RunResult(
        centroids=centers,
        assign=out,
        iterations=rec.stats,
        assign_history=rec.history,
        counters=ctx.counters,
        converged=converged,
        init_centroids=init.copy(),
        label=config.label(),
        build_nanos=build_nanos,
        extra={},
    )
