"""Sequential accelerators: one assignment pass per iteration, same answers.

Every strategy here reproduces Lloyd's assignment vector at every iteration,
including the lowest-index tie-break, while skipping distance computations
it can prove pointless.  The proofs all share one shape: a centroid is
skipped only when some bound shows it is *strictly* farther than the current
best, so it can neither win nor tie.

Refinement goes through the same bincount kernel as the Lloyd baseline, so
centroids stay bit-identical to the oracle run and the strategies can never
drift onto a different trajectory through rounding.

The per-point distance budget of every pass is k: one distance to the
assigned centroid (reused wherever a kernel wants it again) plus at most one
distance to each other centroid.
"""

from __future__ import annotations

import heapq
import math
import time

import numpy as np

from . import bounds as bnd
from .bounds import BoundState
from .core import (
    ContractError,
    RunContext,
    as_matrix,
    dist_matrix,
    dist_paired,
    dist_point_centers,
    dist_rows_center,
    dist_submatrix_fill,
    make_init,
    sse,
)
from .lloyd import IterationRecorder, RunResult, assign_full, refine_full
from .tree import TreeNode, build_balltree


def _two_smallest(d_row_matrix: np.ndarray):
    """Per row: smallest value and second-smallest value (inf when k == 1)."""
    k = d_row_matrix.shape[1]
    if k == 1:
        return d_row_matrix[:, 0].copy(), np.full(len(d_row_matrix), np.inf)
    part = np.partition(d_row_matrix, 1, axis=1)
    return part[:, 0].copy(), part[:, 1].copy()


def _switch(best_d, best_j, d, j):
    """Vectorized lexicographic (distance, index) improvement mask."""
    return (d < best_d) | ((d == best_d) & (j < best_j))


def _max_other(drifts: np.ndarray, assign: np.ndarray) -> np.ndarray:
    """Per point: the largest drift among centroids other than its own."""
    if len(drifts) == 1:
        return np.zeros(len(assign))
    top = int(np.argmax(drifts))
    rest = np.delete(drifts, top)
    second = float(rest.max()) if len(rest) else 0.0
    out = np.full(len(assign), drifts[top])
    out[assign == top] = second
    return out


class SequentialStrategy:
    """Base: full-scan seeding, drift decay, and a per-iteration pass."""

    name = "base"

    def __init__(self, ctx: RunContext, data: np.ndarray, k: int):
        self.ctx = ctx
        self.data = data
        self.n, self.d = data.shape
        self.k = k
        self.state = BoundState()
        self.last_drifts = np.zeros(k)

    def seed(self, centers: np.ndarray) -> np.ndarray:
        d = dist_matrix(self.ctx, self.data, centers)
        assign = np.argmin(d, axis=1).astype(np.int64)
        self._seed_state(d, assign, centers)
        return assign

    def _seed_state(self, d: np.ndarray, assign: np.ndarray, centers: np.ndarray):
        raise NotImplementedError

    def update_bounds(self, old_centers, new_centers, assign):
        raise NotImplementedError

    def assign_pass(self, centers: np.ndarray, assign: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def validate(self, centers: np.ndarray, assign: np.ndarray, where: str):
        bnd.validate_bounds(self.ctx, self.data, centers, assign, self.state,
                            self.name, where)

    def footprint_floats(self) -> int:
        return self.state.footprint_floats()

    # helpers shared by the Hamerly-style strategies

    def _tighten(self, centers, assign, active_idx):
        """Replace stale upper bounds with exact assigned distances."""
        if not len(active_idx):
            return np.empty(0)
        d_a = dist_paired(self.ctx, self.data[active_idx], centers[assign[active_idx]])
        self.state.ub[active_idx] = d_a
        self.ctx.counters.bound_updates += len(active_idx)
        return d_a


class Elkan(SequentialStrategy):
    """Per-centroid lower bounds plus centroid-separation tests."""

    name = "elkan"

    def _seed_state(self, d, assign, centers):
        rows = np.arange(self.n)
        self.state.ub = d[rows, assign].copy()
        self.state.lb_center = d.copy()
        self.ctx.counters.bound_updates += d.size + self.n

    def update_bounds(self, old_centers, new_centers, assign):
        drifts = bnd.center_drifts(self.ctx, old_centers, new_centers)
        self.last_drifts = drifts
        self.state.lb_center = np.maximum(self.state.lb_center - self._decay(drifts), 0.0)
        self.state.ub += drifts[assign]
        self.ctx.counters.bound_updates += self.state.lb_center.size + self.n

    def _decay(self, drifts: np.ndarray) -> np.ndarray:
        """Row vector subtracted from every point's lower bounds."""
        return drifts[None, :]

    def assign_pass(self, centers, assign):
        st = self.state
        inter = bnd.inter_center(self.ctx, centers)
        s = bnd.half_nearest_other(inter)
        half_cc = 0.5 * inter
        a0 = assign.copy()
        self.ctx.counters.bound_accesses += self.n

        active = st.ub >= s[a0]
        idx = np.nonzero(active)[0]
        d_a = self._tighten(centers, a0, idx)
        if len(idx):
            st.lb_center[idx, a0[idx]] = d_a
        work = idx[d_a >= s[a0[idx]]]

        best_d = st.ub.copy()
        best_j = a0.copy()
        for j in range(self.k):
            rows = work[
                (best_j[work] != j)
                & (a0[work] != j)
                & (st.lb_center[work, j] <= best_d[work])
                & (half_cc[best_j[work], j] <= best_d[work])
            ]
            self.ctx.counters.bound_accesses += 2 * len(work)
            if not len(rows):
                continue
            d = dist_rows_center(self.ctx, self.data[rows], centers[j])
            st.lb_center[rows, j] = d
            self.ctx.counters.bound_updates += len(rows)
            sw = _switch(best_d[rows], best_j[rows], d, j)
            upd = rows[sw]
            best_d[upd] = d[sw]
            best_j[upd] = j
        st.ub = best_d
        return best_j

    def footprint_floats(self):
        return super().footprint_floats()


class Drift2D(Elkan):
    """Elkan with the closed-form 2-D drift estimate folded into decay.

    The estimate is only admitted when it is at least the true drift (a
    looser decay is always valid; a tighter one would need the geometric
    argument the estimate alone does not carry), so on any data this decays
    by exactly the true drift and additionally reports how often the
    estimate undercut it.
    """

    name = "drift"

    def __init__(self, ctx, data, k):
        super().__init__(ctx, data, k)
        self.state.extras["estimate_below_true"] = 0
        self.state.extras["estimate_total"] = 0
        self._prev_centers = None

    def update_bounds(self, old_centers, new_centers, assign):
        self._prev_centers = old_centers
        self._assign_snapshot = assign
        super().update_bounds(old_centers, new_centers, assign)

    def _decay(self, drifts: np.ndarray) -> np.ndarray:
        if self.d == 2 and self._prev_centers is not None and self.state.ub is not None:
            radius = np.zeros(self.k)
            np.maximum.at(radius, self._assign_snapshot, self.state.ub)
            decay = drifts.copy()
            for j in range(self.k):
                est = bnd.drift_delta_2d(self._prev_centers[j], float(radius[j]))
                self.state.extras["estimate_total"] += 1
                if est is None:
                    continue
                eff = min(abs(est), float(drifts[j]))
                if eff < drifts[j]:
                    self.state.extras["estimate_below_true"] += 1
                decay[j] = max(eff, float(drifts[j]))
            self.ctx.counters.bound_updates += self.k
            return decay[None, :]
        return drifts[None, :]


class Hamerly(SequentialStrategy):
    """One global lower bound; failed points rescan everything once."""

    name = "hamerly"

    def _seed_state(self, d, assign, centers):
        rows = np.arange(self.n)
        self.state.ub = d[rows, assign].copy()
        _, second = _two_smallest(d)
        self.state.lb_global = second
        self.ctx.counters.bound_updates += 2 * self.n

    def update_bounds(self, old_centers, new_centers, assign):
        drifts = bnd.center_drifts(self.ctx, old_centers, new_centers)
        self.last_drifts = drifts
        self.state.ub += drifts[assign]
        self.state.lb_global -= _max_other(drifts, assign)
        self.ctx.counters.bound_updates += 2 * self.n

    def _gate(self, s, assign):
        return np.maximum(self.state.lb_global, s[assign])

    def assign_pass(self, centers, assign):
        st = self.state
        inter = bnd.inter_center(self.ctx, centers)
        s = bnd.half_nearest_other(inter)
        a = assign.copy()
        self.ctx.counters.bound_accesses += self.n

        active = self._gate(s, a) <= st.ub
        idx = np.nonzero(active)[0]
        d_a = self._tighten(centers, a, idx)
        work = idx[self._gate(s, a)[idx] <= d_a]
        if len(work):
            d_sub = dist_submatrix_fill(self.ctx, self.data[work], centers,
                                        a[work], st.ub[work])
            a_new = np.argmin(d_sub, axis=1).astype(np.int64)
            d1, d2 = _two_smallest(d_sub)
            a[work] = a_new
            st.ub[work] = d1
            st.lb_global[work] = d2
            self.ctx.counters.bound_updates += 2 * len(work)
        return a


class Annulus(SequentialStrategy):
    """Hamerly gate, then a norm-window candidate set around the point."""

    name = "annulus"

    def _seed_state(self, d, assign, centers):
        rows = np.arange(self.n)
        self.state.ub = d[rows, assign].copy()
        _, second = _two_smallest(d)
        self.state.lb_global = second
        if self.k >= 2:
            order = np.argsort(d, axis=1, kind="stable")
            self.state.second_idx = order[:, 1].astype(np.int64)
        else:
            self.state.second_idx = np.zeros(self.n, dtype=np.int64)
        self.state.point_norms = np.sqrt(np.sum(self.data ** 2, axis=1))
        self.ctx.counters.bound_updates += 3 * self.n

    def update_bounds(self, old_centers, new_centers, assign):
        drifts = bnd.center_drifts(self.ctx, old_centers, new_centers)
        self.last_drifts = drifts
        self.state.ub += drifts[assign]
        self.state.lb_global -= _max_other(drifts, assign)
        self.ctx.counters.bound_updates += 2 * self.n

    def assign_pass(self, centers, assign):
        st = self.state
        a = assign.copy()
        center_norms = np.sqrt(np.sum(centers ** 2, axis=1))
        norm_order = np.argsort(center_norms, kind="stable")
        self.ctx.counters.bound_updates += self.k
        self.ctx.counters.bound_accesses += self.n

        active = st.lb_global <= st.ub
        idx = np.nonzero(active)[0]
        d_a = self._tighten(centers, a, idx)
        work = idx[st.lb_global[idx] <= d_a]
        for i in work:
            ai = a[i]
            ub_i = st.ub[i]
            j2 = int(st.second_idx[i])
            d_second = float(np.linalg.norm(self.data[i] - centers[j2]))
            self.ctx.counters.dist_comps += 1
            self.ctx.counters.data_accesses += 1
            threshold = max(ub_i, d_second)
            cand = bnd.annulus_candidates(st.point_norms[i], center_norms,
                                          norm_order, threshold)
            others = cand[(cand != ai) & (cand != j2)]
            vals = [ub_i, d_second]
            ids = [ai, j2]
            if len(others):
                d_o = dist_point_centers(self.ctx, self.data[i], centers[others])
                vals.extend(d_o.tolist())
                ids.extend(others.tolist())
            pairs = sorted(zip(vals, ids))
            (d1, j1), (d2, j2_new) = pairs[0], pairs[1]
            a[i] = j1
            st.ub[i] = d1
            st.lb_global[i] = d2
            st.second_idx[i] = j2_new
            self.ctx.counters.bound_updates += 3
        return a


class Exponion(SequentialStrategy):
    """Hamerly gate, then a ring of centroids around the assigned one."""

    name = "exponion"

    def _seed_state(self, d, assign, centers):
        rows = np.arange(self.n)
        self.state.ub = d[rows, assign].copy()
        _, second = _two_smallest(d)
        self.state.lb_global = second
        self.ctx.counters.bound_updates += 2 * self.n

    def update_bounds(self, old_centers, new_centers, assign):
        drifts = bnd.center_drifts(self.ctx, old_centers, new_centers)
        self.last_drifts = drifts
        self.state.ub += drifts[assign]
        self.state.lb_global -= _max_other(drifts, assign)
        self.ctx.counters.bound_updates += 2 * self.n

    def assign_pass(self, centers, assign):
        st = self.state
        a = assign.copy()
        inter = bnd.inter_center(self.ctx, centers)
        s = bnd.half_nearest_other(inter)
        inter_order = np.argsort(inter, axis=1, kind="stable")
        inter_sorted = np.take_along_axis(inter, inter_order, axis=1)
        self.ctx.counters.bound_accesses += self.n

        gate = np.maximum(st.lb_global, s[a])
        active = gate <= st.ub
        idx = np.nonzero(active)[0]
        d_a = self._tighten(centers, a, idx)
        work = idx[np.maximum(st.lb_global, s[a])[idx] <= d_a]
        for i in work:
            ai = a[i]
            ub_i = float(st.ub[i])
            ring = 2.0 * ub_i + float(self.last_drifts[ai])
            cand = bnd.exponion_candidates(ai, inter_sorted[ai], inter_order[ai], ring)
            others = cand[cand != ai]
            vals = [ub_i]
            ids = [ai]
            if len(others):
                d_o = dist_point_centers(self.ctx, self.data[i], centers[others])
                vals.extend(d_o.tolist())
                ids.extend(others.tolist())
            pairs = sorted(zip(vals, ids))
            d1, j1 = pairs[0]
            d2 = pairs[1][0] if len(pairs) > 1 else np.inf
            outside = ring - ub_i
            a[i] = j1
            st.ub[i] = d1
            st.lb_global[i] = min(d2, outside)
            self.ctx.counters.bound_updates += 2
        return a


class Yinyang(SequentialStrategy):
    """Group lower bounds: prune whole groups, rescan the failed ones."""

    name = "yinyang"
    regroup = False

    def __init__(self, ctx, data, k):
        super().__init__(ctx, data, k)
        self.t = max(1, math.ceil(k / 10))
        self.trivial = k < 2

    def _seed_state(self, d, assign, centers):
        rows = np.arange(self.n)
        st = self.state
        st.ub = d[rows, assign].copy()
        if self.trivial:
            st.lb_global = np.full(self.n, np.inf)
            return
        st.group_of = bnd.group_centroids(centers, self.t, seed=self.ctx.seed)
        st.lb_group = np.empty((self.n, self.t))
        for g in range(self.t):
            cols = np.nonzero(st.group_of == g)[0]
            if not len(cols):
                st.lb_group[:, g] = np.inf
                continue
            sub = d[:, cols].copy()
            in_g = st.group_of[assign] == g
            sub[in_g, np.searchsorted(cols, assign[in_g])] = np.inf
            st.lb_group[:, g] = sub.min(axis=1)
        self.ctx.counters.bound_updates += self.n * (self.t + 1)

    def update_bounds(self, old_centers, new_centers, assign):
        drifts = bnd.center_drifts(self.ctx, old_centers, new_centers)
        self.last_drifts = drifts
        st = self.state
        st.ub += drifts[assign]
        if self.trivial:
            return
        group_drift = np.zeros(self.t)
        np.maximum.at(group_drift, st.group_of, drifts)
        st.lb_group -= group_drift[None, :]
        self.ctx.counters.bound_updates += self.n * (self.t + 1)
        if self.regroup:
            new_of = bnd.regroup_pass(new_centers, st.group_of, self.t)
            self.ctx.counters.bound_dist_comps += self.k * self.t
            if not np.array_equal(new_of, st.group_of):
                st.lb_group = bnd.remap_group_bounds(st.lb_group, st.group_of,
                                                     new_of, self.t)
                st.group_of = new_of
                self.ctx.counters.bound_updates += st.lb_group.size

    def assign_pass(self, centers, assign):
        if self.trivial:
            return assign.copy()
        st = self.state
        a = assign.copy()
        self.ctx.counters.bound_accesses += self.n * self.t

        lb_min = st.lb_group.min(axis=1)
        active = lb_min <= st.ub
        idx = np.nonzero(active)[0]
        d_exact = self._tighten(centers, a, idx)
        work = idx[lb_min[idx] <= d_exact]
        if not len(work):
            return a
        d_assigned = st.ub[work].copy()

        best_d = st.ub[work].copy()
        best_j = a[work].copy()
        scanned: list[tuple[int, np.ndarray, np.ndarray, np.ndarray]] = []
        for g in range(self.t):
            cols = np.nonzero(st.group_of == g)[0]
            if not len(cols):
                continue
            mask = st.lb_group[work, g] <= best_d
            self.ctx.counters.bound_accesses += len(work)
            rows = np.nonzero(mask)[0]
            if not len(rows):
                continue
            pts = work[rows]
            pos = np.searchsorted(cols, a[pts])
            fill = np.where((pos < len(cols)) & (cols[np.minimum(pos, len(cols) - 1)] == a[pts]),
                            pos, -1)
            d_g = dist_submatrix_fill(self.ctx, self.data[pts], centers[cols],
                                      fill.astype(np.int64), d_assigned[rows])
            loc = np.argmin(d_g, axis=1)
            d_min = d_g[np.arange(len(rows)), loc]
            j_min = cols[loc]
            sw = _switch(best_d[rows], best_j[rows], d_min, j_min)
            best_d[rows[sw]] = d_min[sw]
            best_j[rows[sw]] = j_min[sw]
            scanned.append((g, pts, rows, d_g))

        a_new_work = best_j
        for g, pts, rows, d_g in scanned:
            cols = np.nonzero(st.group_of == g)[0]
            masked = d_g.copy()
            hit = cols[None, :] == a_new_work[rows][:, None]
            masked[hit] = np.inf
            st.lb_group[pts, g] = masked.min(axis=1)
            self.ctx.counters.bound_updates += len(pts)

        moved = np.nonzero(a_new_work != a[work])[0]
        if len(moved):
            pts = work[moved]
            g_old = st.group_of[a[pts]]
            st.lb_group[pts, g_old] = np.minimum(st.lb_group[pts, g_old],
                                                 d_assigned[moved])
        st.ub[work] = best_d
        a[work] = a_new_work
        return a


class Regroup(Yinyang):
    """Yinyang with the centroid-to-group map rebuilt every iteration."""

    name = "regroup"
    regroup = True


class Drake(SequentialStrategy):
    """A short sorted list of per-centroid bounds; walk until one holds."""

    name = "drake"

    def __init__(self, ctx, data, k):
        super().__init__(ctx, data, k)
        self.b = min(math.ceil(k / 4), max(k - 1, 1))

    def _seed_state(self, d, assign, centers):
        rows = np.arange(self.n)
        st = self.state
        st.ub = d[rows, assign].copy()
        order = np.argsort(d, axis=1, kind="stable")
        st.sorted_idx = order[:, 1:self.b + 1].astype(np.int64)
        st.sorted_vals = np.take_along_axis(d, st.sorted_idx, axis=1).copy()
        if self.k - 1 > self.b:
            st.rest_bound = d[rows, order[:, self.b + 1]].copy()
        else:
            st.rest_bound = np.full(self.n, np.inf)
        self.ctx.counters.bound_updates += self.n * (self.b + 2)

    def update_bounds(self, old_centers, new_centers, assign):
        drifts = bnd.center_drifts(self.ctx, old_centers, new_centers)
        self.last_drifts = drifts
        st = self.state
        st.ub += drifts[assign]
        st.sorted_vals -= drifts[st.sorted_idx]
        finite = np.isfinite(st.rest_bound)
        st.rest_bound[finite] -= drifts.max()
        order = np.argsort(st.sorted_vals, axis=1, kind="stable")
        st.sorted_vals = np.take_along_axis(st.sorted_vals, order, axis=1)
        st.sorted_idx = np.take_along_axis(st.sorted_idx, order, axis=1)
        self.ctx.counters.bound_updates += self.n * (self.b + 1)

    def assign_pass(self, centers, assign):
        st = self.state
        a = assign.copy()
        self.ctx.counters.bound_accesses += self.n

        first = st.sorted_vals[:, 0] if self.b else np.full(self.n, np.inf)
        gate = np.minimum(first, st.rest_bound)
        active = gate <= st.ub
        idx = np.nonzero(active)[0]
        d_a = self._tighten(centers, a, idx)
        work = idx[np.minimum(first, st.rest_bound)[idx] <= d_a]
        for i in work:
            best_d = float(st.ub[i])
            best_j = int(a[i])
            vals = st.sorted_vals[i]
            idxs = st.sorted_idx[i]
            m = 0
            while m < self.b:
                if vals[m] > best_d:
                    break
                j = int(idxs[m])
                dj = float(np.linalg.norm(self.data[i] - centers[j]))
                self.ctx.counters.dist_comps += 1
                self.ctx.counters.data_accesses += 1
                vals[m] = dj
                if dj < best_d or (dj == best_d and j < best_j):
                    best_d, best_j = dj, j
                m += 1
            if st.rest_bound[i] <= best_d:
                unmeasured = np.ones(self.k, dtype=bool)
                unmeasured[a[i]] = False
                unmeasured[idxs[:m]] = False
                others = np.nonzero(unmeasured)[0]
                d_o = dist_point_centers(self.ctx, self.data[i], centers[others])
                full = np.empty(self.k)
                full[a[i]] = st.ub[i]
                full[idxs[:m]] = vals[:m]
                full[others] = d_o
                # bounds for the never-measured tail are valid stand-ins
                full[idxs[m:]] = np.maximum(vals[m:], 0.0)
                order = np.lexsort((np.arange(self.k), full))
                best_j = int(order[0])
                best_d = float(full[best_j])
                st.sorted_idx[i] = order[1:self.b + 1]
                st.sorted_vals[i] = full[st.sorted_idx[i]]
                st.rest_bound[i] = full[order[self.b + 1]] if self.k - 1 > self.b else np.inf
            elif best_j != a[i]:
                pos = int(np.nonzero(idxs == best_j)[0][0])
                idxs[pos] = a[i]
                vals[pos] = st.ub[i]
                order = np.argsort(vals, kind="stable")
                st.sorted_vals[i] = vals[order]
                st.sorted_idx[i] = idxs[order]
            else:
                order = np.argsort(vals, kind="stable")
                st.sorted_vals[i] = vals[order]
                st.sorted_idx[i] = idxs[order]
            st.ub[i] = best_d
            a[i] = best_j
            self.ctx.counters.bound_updates += self.b + 1
        return a


class HeapPruner(SequentialStrategy):
    """Per-cluster heaps on the bound gap; only surfaced points rescan."""

    name = "heap"

    def __init__(self, ctx, data, k):
        super().__init__(ctx, data, k)
        self.heaps: list[list] = [[] for _ in range(k)]
        self.token = np.zeros(self.n, dtype=np.int64)

    def _seed_state(self, d, assign, centers):
        st = self.state
        st.heap_offset = np.zeros(self.k)
        d1, d2 = _two_smallest(d)
        st.heap_key = d2 - d1
        for i in range(self.n):
            heapq.heappush(self.heaps[assign[i]], (st.heap_key[i], 0, i))
        self.ctx.counters.bound_updates += self.n

    def update_bounds(self, old_centers, new_centers, assign):
        drifts = bnd.center_drifts(self.ctx, old_centers, new_centers)
        self.last_drifts = drifts
        if self.k == 1:
            return
        top = int(np.argmax(drifts))
        rest = np.delete(drifts, top)
        second = float(rest.max()) if len(rest) else 0.0
        other = np.full(self.k, drifts[top])
        other[top] = second
        self.state.heap_offset += drifts + other
        self.ctx.counters.bound_updates += self.k

    def assign_pass(self, centers, assign):
        st = self.state
        a = assign.copy()
        for c in range(self.k):
            h = self.heaps[c]
            while h:
                key, tok, i = h[0]
                if tok != self.token[i] or a[i] != c:
                    heapq.heappop(h)
                    continue
                self.ctx.counters.bound_accesses += 1
                if key - st.heap_offset[c] > 0.0:
                    break
                heapq.heappop(h)
                row = dist_point_centers(self.ctx, self.data[i], centers)
                j = int(np.argmin(row))
                d1 = row[j]
                d2 = np.partition(row, 1)[1] if self.k > 1 else np.inf
                self.token[i] += 1
                st.heap_key[i] = (d2 - d1) + st.heap_offset[j]
                heapq.heappush(self.heaps[j], (st.heap_key[i], self.token[i], i))
                a[i] = j
                self.ctx.counters.bound_updates += 1
        return a


class RadiusFilter(SequentialStrategy):
    """Cluster-radius candidate sets shared by all members of a cluster.

    Each iteration measures every point against its assigned centroid (the
    radius pass), takes the farthest member as the cluster radius, and then
    only compares members against centroids within twice that radius of the
    cluster's centroid.
    """

    name = "radius"

    def _seed_state(self, d, assign, centers):
        self.state.cluster_radius = np.zeros(self.k)
        rows = np.arange(self.n)
        np.maximum.at(self.state.cluster_radius, assign, d[rows, assign])

    def update_bounds(self, old_centers, new_centers, assign):
        self.last_drifts = bnd.center_drifts(self.ctx, old_centers, new_centers)

    def assign_pass(self, centers, assign):
        inter = bnd.inter_center(self.ctx, centers)
        a = assign.copy()
        d_a = dist_paired(self.ctx, self.data, centers[a])
        radius = np.zeros(self.k)
        np.maximum.at(radius, a, d_a)
        self.state.cluster_radius = radius
        out = a.copy()
        for c in range(self.k):
            rows = np.nonzero(a == c)[0]
            if not len(rows):
                continue
            cand = bnd.radius_candidates(inter[c], float(radius[c]))
            if len(cand) == 1:
                continue
            pos_c = int(np.searchsorted(cand, c))
            fill = np.full(len(rows), pos_c, dtype=np.int64)
            d_sub = dist_submatrix_fill(self.ctx, self.data[rows], centers[cand],
                                        fill, d_a[rows])
            out[rows] = cand[np.argmin(d_sub, axis=1)]
        return out


class BlockVector(SequentialStrategy):
    """Hamerly gate plus a cheap blockwise inner-product bound per centroid."""

    name = "blockvec"
    n_blocks = 2

    def _seed_state(self, d, assign, centers):
        rows = np.arange(self.n)
        st = self.state
        st.ub = d[rows, assign].copy()
        _, second = _two_smallest(d)
        st.lb_global = second
        st.point_blocks = bnd.block_norms(self.data, self.n_blocks)
        st.point_norm_sq = np.sum(self.data ** 2, axis=1)
        self.ctx.counters.bound_updates += 2 * self.n + st.point_blocks.size

    def update_bounds(self, old_centers, new_centers, assign):
        drifts = bnd.center_drifts(self.ctx, old_centers, new_centers)
        self.last_drifts = drifts
        self.state.ub += drifts[assign]
        self.state.lb_global -= _max_other(drifts, assign)
        self.ctx.counters.bound_updates += 2 * self.n

    def assign_pass(self, centers, assign):
        st = self.state
        a = assign.copy()
        center_blocks = bnd.block_norms(centers, self.n_blocks)
        center_norm_sq = np.sum(centers ** 2, axis=1)
        self.ctx.counters.bound_updates += center_blocks.size
        self.ctx.counters.bound_accesses += self.n

        active = st.lb_global <= st.ub
        idx = np.nonzero(active)[0]
        d_exact = self._tighten(centers, a, idx)
        work = idx[st.lb_global[idx] <= d_exact]
        if not len(work):
            return a
        a0 = a[work].copy()

        inner = st.point_blocks[work] @ center_blocks.T
        low = np.sqrt(np.maximum(
            st.point_norm_sq[work][:, None] + center_norm_sq[None, :] - 2.0 * inner,
            0.0,
        ))
        self.ctx.counters.bound_updates += low.size

        effective = low.copy()
        rows_local = np.arange(len(work))
        effective[rows_local, a0] = st.ub[work]
        best_d = st.ub[work].copy()
        best_j = a0.copy()
        for j in range(self.k):
            mask = (a0 != j) & (low[:, j] <= best_d)
            rows = np.nonzero(mask)[0]
            self.ctx.counters.bound_accesses += len(work)
            if not len(rows):
                continue
            dj = dist_rows_center(self.ctx, self.data[work[rows]], centers[j])
            effective[rows, j] = dj
            sw = _switch(best_d[rows], best_j[rows], dj, j)
            best_d[rows[sw]] = dj[sw]
            best_j[rows[sw]] = j
        masked = effective.copy()
        masked[rows_local, best_j] = np.inf
        st.lb_global[work] = masked.min(axis=1)
        st.ub[work] = best_d
        a[work] = best_j
        self.ctx.counters.bound_updates += 2 * len(work)
        return a


class SearchPreassign(SequentialStrategy):
    """Claim points inside each centroid's exclusive half-gap ball via a tree.

    Builds a ball-tree over the data once; every iteration runs one range
    search per centroid with radius half the distance to its nearest other
    centroid.  Points strictly inside a ball are provably nearest to that
    centroid; the rest take a cached full scan.  No bounds persist.
    """

    name = "search"

    def __init__(self, ctx, data, k, capacity: int = 30):
        super().__init__(ctx, data, k)
        t0 = time.perf_counter_ns()
        self.tree = build_balltree(data, capacity=capacity)
        self.build_nanos = time.perf_counter_ns() - t0

    def seed(self, centers):
        return self.assign_pass(centers, np.full(self.n, -1, dtype=np.int64))

    def _seed_state(self, d, assign, centers):  # pragma: no cover - seed() overridden
        raise AssertionError("search seeds via its own pass")

    def update_bounds(self, old_centers, new_centers, assign):
        self.last_drifts = bnd.center_drifts(self.ctx, old_centers, new_centers)

    def assign_pass(self, centers, assign):
        ctx = self.ctx
        inter = bnd.inter_center(ctx, centers)
        radii = bnd.half_nearest_other(inter)
        cache = np.full((self.n, self.k), np.nan)
        out = np.full(self.n, -1, dtype=np.int64)

        def visit(node: TreeNode, j: int, center, radius: float):
            ctx.counters.node_accesses += 1
            dp = float(np.linalg.norm(center - node.pivot))
            ctx.counters.pivot_dist_comps += 1
            if dp > node.radius + radius:
                return
            if node.is_leaf:
                rows = self.tree.covered(node)
                col = cache[rows, j]
                missing = np.isnan(col)
                if missing.any():
                    miss_rows = rows[missing]
                    dm = dist_rows_center(ctx, self.data[miss_rows], center)
                    cache[miss_rows, j] = dm
                    col = cache[rows, j]
                claimed = rows[col < radius]
                out[claimed] = j
                return
            for child in node.children:
                visit(child, j, center, radius)

        for j in range(self.k):
            if np.isfinite(radii[j]):
                visit(self.tree.root, j, centers[j], float(radii[j]))
            else:  # single centroid: everything belongs to it
                out[:] = j
        left = np.nonzero(out < 0)[0]
        if len(left):
            sub = cache[left]
            missing = np.isnan(sub)
            if missing.any():
                rows, cols = np.nonzero(missing)
                pts = self.data[left[rows]]
                d = np.sqrt(np.sum((pts - centers[cols]) ** 2, axis=1))
                ctx.counters.dist_comps += len(rows)
                ctx.counters.data_accesses += len(rows)
                sub[rows, cols] = d
            out[left] = np.argmin(sub, axis=1)
        return out

    def validate(self, centers, assign, where):
        pass  # stateless between iterations; nothing stored to check


STRATEGIES = {
    cls.name: cls
    for cls in (
        Elkan, Hamerly, Drake, Yinyang, Regroup, HeapPruner,
        Annulus, Exponion, RadiusFilter, BlockVector, Drift2D, SearchPreassign,
    )
}


def run_pruner(data, k: int, strategy: str, *, init=None, init_method: str = "kmeanspp",
               t_max: int = 10, capacity: int = 30,
               ctx: RunContext | None = None) -> RunResult:
    """Run one sequential strategy; same contract and stop rule as run_lloyd."""
    ctx = ctx or RunContext()
    data = as_matrix(data)
    if strategy not in STRATEGIES:
        raise ContractError(f"unknown strategy {strategy!r}; know {sorted(STRATEGIES)}")
    n = data.shape[0]
    if init is None:
        init = make_init(ctx, data, k, init_method)
    centers = np.array(init, dtype=np.float64, copy=True)
    if centers.shape != (k, data.shape[1]):
        raise ValueError(f"init shape {centers.shape} does not match (k={k}, d={data.shape[1]})")
    init_copy = centers.copy()

    if k == 1:
        # Nothing to prune with a single centroid; run plain full scans.
        from .lloyd import run_lloyd
        res = run_lloyd(data, k, init=centers, t_max=t_max, ctx=ctx)
        res.label = strategy
        return res

    if strategy == "search":
        strat = SearchPreassign(ctx, data, k, capacity=capacity)
    else:
        strat = STRATEGIES[strategy](ctx, data, k)

    rec = IterationRecorder(ctx, n, k)
    assign = np.full(n, -1, dtype=np.int64)
    converged = False
    for t in range(1, t_max + 1):
        if t > 1:
            strat.update_bounds(old_centers, centers, assign)
            if ctx.debug_validate:
                strat.validate(centers, assign, f"iter{t}:decayed")
        rec.start_assign()
        new_assign = strat.seed(centers) if t == 1 else strat.assign_pass(centers, assign)
        rec.end_assign()
        if ctx.debug_validate:
            strat.validate(centers, new_assign, f"iter{t}:post")
        changed = int(np.count_nonzero(new_assign != assign))
        assign = new_assign
        old_centers = centers
        centers = refine_full(ctx, data, assign, centers)
        rec.end_iteration(assign, changed, sse(data, centers, assign))
        if changed == 0:
            converged = True
            break

    return RunResult(
        centroids=centers,
        assign=assign,
        iterations=rec.stats,
        assign_history=rec.history,
        counters=ctx.counters,
        converged=converged,
        init_centroids=init_copy,
        label=strategy,
        build_nanos=getattr(strat, "build_nanos", 0),
        extra={"footprint_floats": strat.footprint_floats()},
    )
