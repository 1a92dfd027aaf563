"""Lloyd's algorithm: the exact baseline every accelerated variant must match.

``run_lloyd`` is both the reference implementation and the oracle for the
test suite: an accelerated run is correct iff it reproduces Lloyd's
assignment vector at every iteration and its final centroids.

One iteration is one assignment pass plus one refinement pass.  The run
stops after the first iteration in which no point changed cluster, or after
``t_max`` iterations, whichever comes first.  Empty clusters keep their
previous centroid.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import Counters, RunContext, RNG_NAME, as_matrix, dist_matrix, make_init, sse


@dataclass
class IterationStats:
    """Per-iteration counter deltas and timings (assignment phase split out)."""

    index: int
    changed: int
    sse: float
    assign_nanos: int
    refine_nanos: int
    dist_comps: int
    pivot_dist_comps: int
    bound_dist_comps: int
    data_accesses: int
    node_accesses: int
    bound_accesses: int
    bound_updates: int

    def pruning_power(self, n: int, k: int) -> float:
        """Fraction of the n*k full-scan distance budget that was avoided."""
        return 1.0 - self.dist_comps / float(n * k)


@dataclass
class RunResult:
    """Outcome of one clustering run, with enough detail to audit it."""

    centroids: np.ndarray
    assign: np.ndarray
    iterations: list[IterationStats]
    assign_history: list[np.ndarray]
    counters: Counters
    converged: bool
    init_centroids: np.ndarray
    rng_name: str = RNG_NAME
    label: str = "lloyd"
    build_nanos: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def n_iterations(self) -> int:
        return len(self.iterations)

    def total_wall_nanos(self) -> int:
        return self.build_nanos + sum(s.assign_nanos + s.refine_nanos for s in self.iterations)


def assign_full(ctx: RunContext, data: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Assign every point to its nearest centroid by a full n*k scan.

    Ties go to the lowest centroid index (argmin keeps the first minimum).
    """
    d = dist_matrix(ctx, data, centers)
    return np.argmin(d, axis=1).astype(np.int64)


def refine_full(ctx: RunContext, data: np.ndarray, assign: np.ndarray,
                prev_centers: np.ndarray) -> np.ndarray:
    """Recompute each centroid as the mean of its members.

    Reads every point once.  A cluster with no members keeps its previous
    centroid.  The per-dimension bincount keeps the summation order fixed, so
    repeated calls on equal inputs are bit-identical; the pruning strategies
    rely on that to stay in lockstep with the Lloyd oracle.
    """
    n, d = data.shape
    k = prev_centers.shape[0]
    counts = np.bincount(assign, minlength=k)
    sums = np.empty((k, d), dtype=np.float64)
    for dim in range(d):
        sums[:, dim] = np.bincount(assign, weights=data[:, dim], minlength=k)
    ctx.counters.data_accesses += n
    out = prev_centers.copy()
    nz = counts > 0
    out[nz] = sums[nz] / counts[nz, None]
    return out


class IterationRecorder:
    """Collects per-iteration stats; shared by every runner in the package."""

    def __init__(self, ctx: RunContext, n: int, k: int):
        self.ctx = ctx
        self.n = n
        self.k = k
        self.stats: list[IterationStats] = []
        self.history: list[np.ndarray] = []
        self._mark = ctx.counters.copy()
        self._assign_nanos = 0
        self._t0 = 0

    def start_assign(self):
        self._t0 = time.perf_counter_ns()

    def end_assign(self):
        self._assign_nanos = time.perf_counter_ns() - self._t0
        self._t0 = time.perf_counter_ns()

    def end_iteration(self, assign: np.ndarray, changed: int, sse_value: float):
        refine_nanos = time.perf_counter_ns() - self._t0
        delta = self.ctx.counters.delta(self._mark)
        self._mark = self.ctx.counters.copy()
        self.stats.append(
            IterationStats(
                index=len(self.stats) + 1,
                changed=changed,
                sse=sse_value,
                assign_nanos=self._assign_nanos,
                refine_nanos=refine_nanos,
                dist_comps=delta.dist_comps,
                pivot_dist_comps=delta.pivot_dist_comps,
                bound_dist_comps=delta.bound_dist_comps,
                data_accesses=delta.data_accesses,
                node_accesses=delta.node_accesses,
                bound_accesses=delta.bound_accesses,
                bound_updates=delta.bound_updates,
            )
        )
        self.history.append(assign.copy())
        self.ctx.counters.iterations += 1
        self.ctx.counters.wall_nanos += self._assign_nanos + refine_nanos


def run_lloyd(data, k: int, *, init=None, init_method: str = "kmeanspp",
              t_max: int = 10, ctx: RunContext | None = None) -> RunResult:
    """Exact k-means by full scans.  The oracle for everything else here."""
    ctx = ctx or RunContext()
    data = as_matrix(data)
    n = data.shape[0]
    if init is None:
        init = make_init(ctx, data, k, init_method)
    centers = np.array(init, dtype=np.float64, copy=True)
    if centers.shape != (k, data.shape[1]):
        raise ValueError(f"init shape {centers.shape} does not match (k={k}, d={data.shape[1]})")
    init_copy = centers.copy()

    rec = IterationRecorder(ctx, n, k)
    assign = np.full(n, -1, dtype=np.int64)
    converged = False
    for _ in range(t_max):
        rec.start_assign()
        new_assign = assign_full(ctx, data, centers)
        rec.end_assign()
        changed = int(np.count_nonzero(new_assign != assign))
        assign = new_assign
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
        label="lloyd",
    )
