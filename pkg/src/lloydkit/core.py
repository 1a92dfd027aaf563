"""Core model: data/centroid containers, counters, distance kernels, seeding.

Everything downstream (the Lloyd baseline, the bound pruners, the tree
engine) goes through the kernels here so that work accounting stays in one
place.  Counters live on a per-run :class:`RunContext`; there is no module
state, and two runs never share counters.

Counting rules
--------------
``dist_comps`` counts point-to-centroid distances in the assignment path:
this is the quantity that equals ``n * k`` per iteration for a full scan and
is the denominator of pruning power.  Distances between centroids (used to
derive bounds) and distances to tree-node pivots are real work but a
different kind, so they are kept in ``bound_dist_comps`` and
``pivot_dist_comps``.  SSE evaluation and seeding are not part of the
assignment loop and do not count at all.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

RNG_NAME = "pcg64"  # numpy's default_rng bit generator, recorded in run logs


class ContractError(ValueError):
    """An operation was called with arguments violating its contract."""


@dataclass
class Counters:
    """Work counters for one run.  All integers, all monotone."""

    dist_comps: int = 0
    pivot_dist_comps: int = 0
    bound_dist_comps: int = 0
    data_accesses: int = 0
    node_accesses: int = 0
    bound_accesses: int = 0
    bound_updates: int = 0
    iterations: int = 0
    wall_nanos: int = 0

    def copy(self) -> "Counters":
        return dataclasses.replace(self)

    def delta(self, earlier: "Counters") -> "Counters":
        return Counters(
            **{
                f.name: getattr(self, f.name) - getattr(earlier, f.name)
                for f in dataclasses.fields(self)
            }
        )


@dataclass
class RunContext:
    """Per-run bundle of counters, RNG, and debug switches."""

    seed: int = 0
    counters: Counters = field(default_factory=Counters)
    debug_validate: bool = False
    violations: list = field(default_factory=list)
    rng: np.random.Generator = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.rng is None:
            self.rng = np.random.default_rng(self.seed)


def as_matrix(data) -> np.ndarray:
    """Validate and return data as a float64 (n, d) matrix."""
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise ContractError(f"expected a 2-D array, got shape {x.shape}")
    if x.shape[0] == 0 or x.shape[1] == 0:
        raise ContractError(f"empty data matrix with shape {x.shape}")
    if not np.isfinite(x).all():
        raise ContractError("data contains non-finite values")
    return x


def dist_point_centers(ctx: RunContext, x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Distances from one point to a set of centroids.  Counted.

    Returns a vector of length len(centers).
    """
    d = np.sqrt(np.sum((centers - x) ** 2, axis=1))
    m = len(centers)
    ctx.counters.dist_comps += m
    ctx.counters.data_accesses += m
    return d


def dist_matrix(ctx: RunContext, points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Full (n_points, n_centers) distance matrix.  Counted.

    The broadcast subtraction is exact (no norm-expansion cancellation), so
    scalar and matrix paths agree bitwise on identical inputs.
    """
    diff = points[:, None, :] - centers[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=2))
    ctx.counters.dist_comps += d.size
    ctx.counters.data_accesses += d.size
    return d


def dist_rows_center(ctx: RunContext, points: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Distances from a batch of points to one centroid.  Counted."""
    d = np.sqrt(np.sum((points - center) ** 2, axis=1))
    n = len(points)
    ctx.counters.dist_comps += n
    ctx.counters.data_accesses += n
    return d


def dist_paired(ctx: RunContext, points: np.ndarray, paired_centers: np.ndarray) -> np.ndarray:
    """Row-wise distances: point i to its own centroid row i.  Counted."""
    d = np.sqrt(np.sum((points - paired_centers) ** 2, axis=1))
    n = len(points)
    ctx.counters.dist_comps += n
    ctx.counters.data_accesses += n
    return d


def dist_submatrix_fill(ctx: RunContext, points: np.ndarray, centers: np.ndarray,
                        fill_col: np.ndarray, fill_vals: np.ndarray) -> np.ndarray:
    """Distance matrix where one already-known entry per row is reused.

    ``fill_col[r]`` names the column of row r whose distance is known
    (``fill_vals[r]``); rows with fill_col < 0 have no known entry.  The
    vectorized kernel evaluates the whole block, then the known entries are
    written back; the counters only charge the entries the algorithm
    actually needed, which is what keeps a strategy's per-point distance
    budget at k even when it re-checks its assigned centroid first.
    """
    diff = points[:, None, :] - centers[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=2))
    known = fill_col >= 0
    rows = np.nonzero(known)[0]
    d[rows, fill_col[rows]] = fill_vals[rows]
    needed = d.size - len(rows)
    ctx.counters.dist_comps += needed
    ctx.counters.data_accesses += needed
    return d


def dist_pivot_centers(ctx: RunContext, pivot: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Distances from a tree-node pivot to centroids.  Counted as pivot work."""
    d = np.sqrt(np.sum((centers - pivot) ** 2, axis=1))
    ctx.counters.pivot_dist_comps += len(centers)
    return d


def dist_center_pairs(ctx: RunContext, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise distances between two centroid sets.  Counted as bound work."""
    diff = a[:, None, :] - b[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=2))
    ctx.counters.bound_dist_comps += d.size
    return d


def pairwise_sq(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Uncounted squared-distance helper for oracles and shadow checks."""
    diff = a[:, None, :] - b[None, :, :]
    return np.sum(diff * diff, axis=2)


def sse(data: np.ndarray, centers: np.ndarray, assign: np.ndarray) -> float:
    """Sum of squared distances from each point to its assigned centroid.

    Instrumentation only; never touches the counters.
    """
    data = np.asarray(data, dtype=np.float64)
    diff = data - centers[assign]
    return float(np.sum(diff * diff))


def init_random(ctx: RunContext, data: np.ndarray, k: int) -> np.ndarray:
    """Pick k distinct rows uniformly at random as starting centroids."""
    data = as_matrix(data)
    n = data.shape[0]
    if not 1 <= k <= n:
        raise ContractError(f"k={k} out of range for n={n}")
    idx = ctx.rng.choice(n, size=k, replace=False)
    return data[idx].copy()


def init_kmeanspp(ctx: RunContext, data: np.ndarray, k: int) -> np.ndarray:
    """D^2-weighted seeding.

    The first centroid is uniform; each later one is drawn with probability
    proportional to the squared distance to the nearest centroid chosen so
    far.  If every remaining point sits exactly on a chosen centroid (all
    weights zero), the draw falls back to uniform over the unchosen rows.
    """
    data = as_matrix(data)
    n = data.shape[0]
    if not 1 <= k <= n:
        raise ContractError(f"k={k} out of range for n={n}")
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = ctx.rng.integers(n)
    d2 = np.sum((data - data[chosen[0]]) ** 2, axis=1)
    for j in range(1, k):
        taken = chosen[:j]
        total = d2.sum()
        if total > 0.0:
            probs = d2 / total
            chosen[j] = ctx.rng.choice(n, p=probs)
        else:
            remaining = np.setdiff1d(np.arange(n), taken)
            chosen[j] = ctx.rng.choice(remaining)
        d2 = np.minimum(d2, np.sum((data - data[chosen[j]]) ** 2, axis=1))
    return data[chosen].copy()


INITS = {"random": init_random, "kmeanspp": init_kmeanspp}


def make_init(ctx: RunContext, data: np.ndarray, k: int, method: str = "kmeanspp") -> np.ndarray:
    try:
        fn = INITS[method]
    except KeyError:
        raise ContractError(f"unknown init method {method!r}") from None
    return fn(ctx, data, k)
