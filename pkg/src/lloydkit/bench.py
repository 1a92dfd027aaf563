"""Benchmark plumbing: datasets, run logs, the sweep driver, and reports.

A benchmark cell is (dataset, k, seed).  Every configuration in a cell
starts from the same k-means++ initialization so wall-clock and counter
differences are attributable to the algorithm alone.  Each run serializes
to one JSON line; reports aggregate those lines per configuration label.
"""

from __future__ import annotations

import json
import math
import time
import uuid
from dataclasses import dataclass, field

import numpy as np

from .core import ContractError, RunContext, as_matrix, make_init
from .engine import BOUND_STRATEGIES, INDEX_MODES, KnobConfig, run_engine
from .tree import Tree

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# datasets


def load_dataset(path: str) -> np.ndarray:
    """Read a headerless numeric table (CSV or whitespace separated).

    Errors carry 1-based row numbers so a bad line in a big file is
    findable.  Column count is fixed by the first data row.
    """
    rows: list[list[float]] = []
    width = -1
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",") if "," in line else line.split()
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise ContractError(f"{path}: row {lineno}: {exc}") from None
            if width == -1:
                width = len(vals)
            elif len(vals) != width:
                raise ContractError(
                    f"{path}: row {lineno}: expected {width} columns, got {len(vals)}")
            if not all(math.isfinite(v) for v in vals):
                raise ContractError(f"{path}: row {lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise ContractError(f"{path}: empty dataset")
    return np.asarray(rows, dtype=np.float64)


def save_dataset(path: str, data: np.ndarray):
    np.savetxt(path, as_matrix(data), delimiter=",", fmt="%.17g")


def gen_gaussian(n: int, d: int, k_true: int, variance: float,
                 seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Isotropic Gaussian blobs around uniform centers in the unit cube.

    Points split as evenly as possible across the k_true clusters (the
    first ``n % k_true`` clusters get the extra point).  Returns
    (data, true labels); deterministic in the seed.
    """
    if n < 1 or d < 1 or k_true < 1 or k_true > n:
        raise ContractError(f"bad blob shape n={n} d={d} k_true={k_true}")
    if variance < 0:
        raise ContractError(f"variance must be non-negative, got {variance}")
    rng = np.random.default_rng(seed)
    centers = rng.random((k_true, d))
    sizes = np.full(k_true, n // k_true, dtype=np.int64)
    sizes[: n % k_true] += 1
    labels = np.repeat(np.arange(k_true, dtype=np.int64), sizes)
    noise = rng.normal(0.0, math.sqrt(variance), (n, d))
    return centers[labels] + noise, labels


# ---------------------------------------------------------------------------
# memory footprint


def footprint_estimate(n: int, d: int, f: int) -> float:
    """Predicted float count of a capacity-f tree over n points in d dims.

    Counts the row permutation (n entries), one leaf record per n/f points
    (two d-vectors plus four scalars), and the internal records implied by a
    binary tree over those leaves, each two scalars heavier for the child
    links.  The internal count n/f * (1 - 2^(1 - log2(n/f))) telescopes the
    level sums of a balanced binary tree and is clamped at zero so a
    single-leaf tree costs just its own record.
    """
    if n < 1 or d < 1 or f < 1:
        raise ContractError(f"bad footprint shape n={n} d={d} f={f}")
    leaves = n / f
    if leaves > 0:
        q = leaves * (1.0 - 2.0 ** (1.0 - math.log2(leaves)))
    else:
        q = 0.0
    q = max(q, 0.0)
    return n + leaves * (2 * d + 4) + q * (2 * d + 6)


def footprint_measured(tree: Tree) -> float:
    """Float count actually held by a built tree, node by node.

    Same accounting as the estimate: permutation rows, then per node two
    d-vectors (pivot, sum vector) and four scalars, plus two child links
    for internal nodes.
    """
    d = tree.data.shape[1]
    total = float(tree.data.shape[0])
    for node in tree.nodes:
        total += 2 * d + 4 + (0 if node.is_leaf else 2)
    return total


# ---------------------------------------------------------------------------
# run logs


@dataclass
class RunLog:
    """One benchmark run, serializable as a single JSON line."""

    run_id: str
    dataset_id: str
    n: int
    d: int
    k: int
    config: dict
    init_seed: int
    iterations: list[dict] = field(default_factory=list)
    totals: dict = field(default_factory=dict)
    footprint_bytes_estimate: float = 0.0
    error: str | None = None
    schema_version: int = SCHEMA_VERSION

    @property
    def label(self) -> str:
        return KnobConfig(**self.config).label()

    def wall_nanos(self) -> int:
        return int(self.totals.get("wall_nanos", 0))

    def to_json(self) -> str:
        return json.dumps(self.__dict__)

    @classmethod
    def from_json(cls, line: str) -> "RunLog":
        obj = json.loads(line)
        if obj.get("schema_version") != SCHEMA_VERSION:
            raise ContractError(f"unknown run-log schema {obj.get('schema_version')!r}")
        out = cls(**obj)
        _check_totals(out)
        return out


_SUMMED = ("wall_nanos", "dist_comps", "data_accesses", "bound_accesses", "bound_updates")


def _check_totals(log: RunLog):
    if log.error is not None:
        return
    for key in _SUMMED:
        total = sum(int(it[key]) for it in log.iterations)
        if int(log.totals.get(key, -1)) != total:
            raise ContractError(f"{log.run_id}: totals[{key}] != per-iteration sum")
    for it in log.iterations:
        if not 0.0 <= it["pruning_power"] <= 1.0:
            raise ContractError(f"{log.run_id}: pruning power outside [0, 1]")


def runlog_from_result(result, *, dataset_id: str, n: int, d: int, k: int,
                       config: KnobConfig, init_seed: int) -> RunLog:
    iters = []
    for st in result.iterations:
        iters.append({
            "iter": st.index,
            "wall_nanos": int(st.assign_nanos + st.refine_nanos),
            "dist_comps": int(st.dist_comps),
            "data_accesses": int(st.data_accesses),
            "bound_accesses": int(st.bound_accesses),
            "bound_updates": int(st.bound_updates),
            "pruning_power": float(st.pruning_power(n, k)),
            "sse": float(st.sse),
        })
    totals = {key: sum(int(it[key]) for it in iters) for key in _SUMMED}
    uses_tree = config.use_search or config.index_mode not in ("none",)
    fp = 8.0 * footprint_estimate(n, d, config.capacity) if uses_tree else 0.0
    return RunLog(
        run_id=f"{dataset_id}-k{k}-s{init_seed}-{config.label()}-{uuid.uuid4().hex[:8]}",
        dataset_id=dataset_id, n=n, d=d, k=k,
        config=config.__dict__.copy(), init_seed=init_seed,
        iterations=iters, totals=totals, footprint_bytes_estimate=fp,
    )


def write_runlogs(path: str, logs: list[RunLog]):
    with open(path, "w", encoding="utf-8") as fh:
        for log in logs:
            fh.write(log.to_json() + "\n")


def read_runlogs(path: str) -> list[RunLog]:
    logs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                logs.append(RunLog.from_json(line))
    return logs


# ---------------------------------------------------------------------------
# configuration labels


def parse_algo(label: str, *, capacity: int = 30, t_max: int = 10,
               seed: int = 0) -> KnobConfig:
    """Inverse of KnobConfig.label(): 'lloyd', a bound name, 'search',
    or '{ball|kd}-{mode}[+{bound}]'."""
    kw = dict(capacity=capacity, t_max=t_max, seed=seed)
    if label == "lloyd":
        return KnobConfig(**kw)
    if label == "search":
        return KnobConfig(use_search=True, **kw)
    if label in BOUND_STRATEGIES:
        return KnobConfig(bound_strategy=label, **kw)
    head, _, bound = label.partition("+")
    kind, _, mode = head.partition("-")
    if kind in ("ball", "kd") and mode in INDEX_MODES and mode != "none":
        return KnobConfig(index_mode=mode, bound_strategy=bound or "none",
                          index_kind=kind, **kw).validate()
    raise ContractError(f"unknown algorithm label {label!r}")


# ---------------------------------------------------------------------------
# the sweep driver


def run_benchmark(datasets: list[tuple[str, np.ndarray]], ks: list[int],
                  configs: list[KnobConfig], *, seeds: tuple[int, ...] = (0,),
                  init_method: str = "kmeanspp",
                  validate: bool = False) -> tuple[list[RunLog], dict]:
    """Run every configuration on every (dataset, k, seed) cell.

    The plain Lloyd configuration is always included (it anchors speedups).
    A failing run is logged with its error and skipped in aggregation; it
    does not abort the sweep.  Returns (logs, summary) where summary maps
    each configuration label to mean/median speedup over the cells it
    completed and its mean pruning power.
    """
    if not datasets or not ks or not configs:
        raise ContractError("need at least one dataset, k, and configuration")
    all_configs = list(configs)
    if not any(c.label() == "lloyd" for c in all_configs):
        ref = configs[0]
        all_configs.insert(0, KnobConfig(t_max=ref.t_max, capacity=ref.capacity))

    logs: list[RunLog] = []
    lloyd_wall: dict[tuple, int] = {}
    violations: list[str] = []
    for dataset_id, data in datasets:
        data = as_matrix(data)
        n, d = data.shape
        for k in ks:
            for seed in seeds:
                init = make_init(RunContext(seed=seed), data, k, init_method)
                for config in all_configs:
                    config = KnobConfig(**{**config.__dict__, "seed": seed})
                    try:
                        ctx = RunContext(seed=seed, debug_validate=validate)
                        res = run_engine(data, k, config, init=init, ctx=ctx)
                        violations.extend(ctx.violations)
                        log = runlog_from_result(
                            res, dataset_id=dataset_id, n=n, d=d, k=k,
                            config=config, init_seed=seed)
                    except ContractError as exc:
                        log = RunLog(
                            run_id=f"{dataset_id}-k{k}-s{seed}-{config.label()}-failed",
                            dataset_id=dataset_id, n=n, d=d, k=k,
                            config=config.__dict__.copy(), init_seed=seed,
                            error=str(exc))
                    logs.append(log)
                    if log.error is None and config.label() == "lloyd":
                        lloyd_wall[(dataset_id, k, seed)] = log.wall_nanos()
    if violations:
        raise AssertionError(f"{len(violations)} invariant violations: {violations[:3]}")
    return logs, summarize(logs, lloyd_wall)


def _cell(log: RunLog) -> tuple:
    return (log.dataset_id, log.k, log.init_seed)


def summarize(logs: list[RunLog], lloyd_wall: dict | None = None) -> dict:
    """Per-label aggregates; speedups are against Lloyd in the same cell."""
    if lloyd_wall is None:
        lloyd_wall = {_cell(g): g.wall_nanos() for g in logs
                      if g.error is None and g.label == "lloyd"}
    summary: dict[str, dict] = {}
    by_label: dict[str, list[RunLog]] = {}
    for log in logs:
        by_label.setdefault(log.label, []).append(log)
    for label, group in by_label.items():
        ok = [g for g in group if g.error is None]
        speedups = [lloyd_wall[_cell(g)] / g.wall_nanos() for g in ok
                    if _cell(g) in lloyd_wall and g.wall_nanos() > 0]
        powers = [it["pruning_power"] for g in ok for it in g.iterations]
        summary[label] = {
            "runs": len(group),
            "failed": len(group) - len(ok),
            "mean_speedup": float(np.mean(speedups)) if speedups else float("nan"),
            "median_speedup": float(np.median(speedups)) if speedups else float("nan"),
            "mean_pruning_power": float(np.mean(powers)) if powers else 0.0,
            "mean_dist_comps": float(np.mean([g.totals["dist_comps"] for g in ok])) if ok else 0.0,
            "mean_data_accesses": float(np.mean([g.totals["data_accesses"] for g in ok])) if ok else 0.0,
            "mean_bound_accesses": float(np.mean([g.totals["bound_accesses"] for g in ok])) if ok else 0.0,
            "mean_footprint_bytes": float(np.mean([g.footprint_bytes_estimate for g in ok])) if ok else 0.0,
        }
    return summary


# ---------------------------------------------------------------------------
# reports


_REPORT_COLUMNS = ("label", "runs", "failed", "mean_speedup", "median_speedup",
                   "mean_pruning_power", "mean_dist_comps", "mean_data_accesses",
                   "mean_bound_accesses", "mean_footprint_bytes")


def make_report(logs: list[RunLog]) -> list[dict]:
    """Aggregate logs into rows sorted by mean speedup, best first."""
    if not logs:
        raise ContractError("no run logs to report on")
    summary = summarize(logs)
    rows = [{"label": label, **stats} for label, stats in summary.items()]
    rows.sort(key=lambda r: (-(r["mean_speedup"] if r["mean_speedup"] == r["mean_speedup"]
                               else float("-inf")), r["label"]))
    return rows


def render_report(rows: list[dict], fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2)
    if fmt == "csv":
        lines = [",".join(_REPORT_COLUMNS)]
        for r in rows:
            lines.append(",".join(_fmt_cell(r[c]) for c in _REPORT_COLUMNS))
        return "\n".join(lines) + "\n"
    if fmt == "text":
        widths = {c: max(len(c), *(len(_fmt_cell(r[c])) for r in rows)) for c in _REPORT_COLUMNS}
        header = "  ".join(c.ljust(widths[c]) for c in _REPORT_COLUMNS)
        lines = [header, "-" * len(header)]
        for r in rows:
            lines.append("  ".join(_fmt_cell(r[c]).ljust(widths[c]) for c in _REPORT_COLUMNS))
        return "\n".join(lines) + "\n"
    raise ContractError(f"unknown report format {fmt!r}")


def _fmt_cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)
