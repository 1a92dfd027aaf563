import json

import numpy as np
import pytest

import lloydkit.bench as bench
from lloydkit.bench import (
    RunLog,
    footprint_estimate,
    footprint_measured,
    gen_gaussian,
    load_dataset,
    make_report,
    parse_algo,
    read_runlogs,
    render_report,
    run_benchmark,
    save_dataset,
    summarize,
    write_runlogs,
)
from lloydkit.core import ContractError
from lloydkit.engine import KnobConfig
from lloydkit.tree import build_tree


def test_gen_gaussian_deterministic_and_even():
    a, la = gen_gaussian(103, 3, 5, 1e-3, seed=7)
    b, lb = gen_gaussian(103, 3, 5, 1e-3, seed=7)
    assert np.array_equal(a, b) and np.array_equal(la, lb)
    assert a.shape == (103, 3)
    assert np.bincount(la).tolist() == [21, 21, 21, 20, 20]
    c, _ = gen_gaussian(103, 3, 5, 1e-3, seed=8)
    assert not np.array_equal(a, c)
    with pytest.raises(ContractError):
        gen_gaussian(4, 2, 5, 1e-3)
    with pytest.raises(ContractError):
        gen_gaussian(10, 2, 3, -0.1)


def test_gen_gaussian_noise_scale():
    data, labels = gen_gaussian(60000, 2, 3, 0.25, seed=9)
    # per-cluster, per-axis sample std should sit near sqrt(variance)
    spread = data[labels == 0] - data[labels == 0].mean(axis=0)
    assert np.std(spread) == pytest.approx(0.5, rel=0.05)


def test_dataset_round_trip(tmp_path):
    data, _ = gen_gaussian(40, 3, 2, 1e-2, seed=0)
    path = tmp_path / "d.csv"
    save_dataset(str(path), data)
    assert np.allclose(load_dataset(str(path)), data)


def test_load_dataset_errors_name_the_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,4\n5\n")
    with pytest.raises(ContractError, match="row 3"):
        load_dataset(str(path))
    path.write_text("1 2\n3 oops\n")
    with pytest.raises(ContractError, match="row 2"):
        load_dataset(str(path))
    path.write_text("1,2\nnan,4\n")
    with pytest.raises(ContractError, match="row 2"):
        load_dataset(str(path))
    path.write_text("\n  \n")
    with pytest.raises(ContractError, match="empty"):
        load_dataset(str(path))
    # whitespace separation and blank lines are fine
    path.write_text("1 2\n\n3 4\n")
    assert load_dataset(str(path)).shape == (2, 2)


def test_footprint_pinned_value():
    assert footprint_estimate(960, 2, 30) == 1516.0
    # one leaf: the permutation plus a single node record
    assert footprint_estimate(64, 3, 64) == 64 + (2 * 3 + 4)
    with pytest.raises(ContractError):
        footprint_estimate(0, 2, 30)


@pytest.mark.parametrize("levels", [3, 4, 5, 6])
def test_footprint_tracks_balanced_builds(levels):
    f = 30
    n = f * 2 ** levels
    data = np.zeros((n, 2))
    data[:, 0] = np.arange(float(n))
    tree = build_tree(data, "ball", f)
    est = footprint_estimate(n, 2, f)
    meas = footprint_measured(tree)
    assert 0.5 <= est / meas <= 2.0


def test_parse_algo_round_trip():
    labels = ["lloyd", "hamerly", "elkan", "search", "ball-pure", "kd-pure",
              "ball-single+yinyang", "kd-multiple+drake", "ball-adaptive+hamerly"]
    for label in labels:
        assert parse_algo(label).label() == label
    cfg = parse_algo("ball-single+heap", capacity=7, t_max=3, seed=9)
    assert (cfg.capacity, cfg.t_max, cfg.seed) == (7, 3, 9)
    for bad in ("warp", "ball-none", "oct-pure", "ball-pure+elkan"):
        with pytest.raises(ContractError):
            parse_algo(bad)


def small_sweep(tmp_path=None, validate=False):
    data, _ = gen_gaussian(250, 3, 5, 1e-3, seed=0)
    configs = [parse_algo(lbl, t_max=5) for lbl in
               ("lloyd", "hamerly", "ball-pure", "ball-single+yinyang")]
    return run_benchmark([("blob", data)], [5], configs, seeds=(0, 1),
                         validate=validate)


def test_run_benchmark_shares_inits_and_logs_everything():
    logs, summary = small_sweep(validate=True)
    assert len(logs) == 2 * 4
    by_label = {}
    for log in logs:
        assert log.error is None
        by_label.setdefault(log.label, []).append(log)
    assert set(by_label) == {"lloyd", "hamerly", "ball-pure", "ball-single+yinyang"}
    # same cell, same init: iteration counts and SSE trajectories agree
    for label, group in by_label.items():
        for log in group:
            ref = next(g for g in by_label["lloyd"] if g.init_seed == log.init_seed)
            assert len(log.iterations) == len(ref.iterations), label
            for a, b in zip(log.iterations, ref.iterations):
                assert a["sse"] == pytest.approx(b["sse"], rel=1e-12)
    assert summary["lloyd"]["mean_speedup"] == pytest.approx(1.0)
    assert summary["hamerly"]["mean_pruning_power"] > 0.0


def test_runlog_totals_and_round_trip(tmp_path):
    logs, _ = small_sweep()
    path = tmp_path / "logs.jsonl"
    write_runlogs(str(path), logs)
    back = read_runlogs(str(path))
    assert len(back) == len(logs)
    for log in back:
        for key in ("wall_nanos", "dist_comps", "data_accesses",
                    "bound_accesses", "bound_updates"):
            assert log.totals[key] == sum(it[key] for it in log.iterations)
        for it in log.iterations:
            assert 0.0 <= it["pruning_power"] <= 1.0
            assert it["sse"] >= 0.0
        assert log.schema_version == 1

    # tampering with totals must be caught on load
    obj = json.loads(logs[0].to_json())
    obj["totals"]["dist_comps"] += 1
    with pytest.raises(ContractError):
        RunLog.from_json(json.dumps(obj))
    obj = json.loads(logs[0].to_json())
    obj["schema_version"] = 99
    with pytest.raises(ContractError):
        RunLog.from_json(json.dumps(obj))


def test_footprint_reported_only_for_tree_configs():
    logs, _ = small_sweep()
    for log in logs:
        if log.label in ("lloyd", "hamerly"):
            assert log.footprint_bytes_estimate == 0.0
        else:
            assert log.footprint_bytes_estimate == 8.0 * footprint_estimate(250, 3, 30)


def test_failed_run_recorded_not_fatal(monkeypatch):
    real = bench.run_engine

    def sabotage(data, k, config, **kw):
        if config.label() == "hamerly":
            raise ContractError("boom")
        return real(data, k, config, **kw)

    monkeypatch.setattr(bench, "run_engine", sabotage)
    data, _ = gen_gaussian(120, 2, 4, 1e-3, seed=1)
    configs = [parse_algo("lloyd", t_max=4), parse_algo("hamerly", t_max=4)]
    logs, summary = run_benchmark([("blob", data)], [4], configs)
    failed = [g for g in logs if g.error is not None]
    assert len(failed) == 1 and failed[0].label == "hamerly"
    assert "boom" in failed[0].error
    assert summary["hamerly"]["failed"] == 1
    assert summary["lloyd"]["failed"] == 0


def test_run_benchmark_always_anchors_to_lloyd():
    data, _ = gen_gaussian(100, 2, 3, 1e-3, seed=2)
    logs, summary = run_benchmark([("b", data)], [3],
                                  [parse_algo("hamerly", t_max=4)])
    assert "lloyd" in {g.label for g in logs}
    assert np.isfinite(summary["hamerly"]["mean_speedup"])
    with pytest.raises(ContractError):
        run_benchmark([], [3], [parse_algo("hamerly")])


def test_report_sorted_and_rendered(tmp_path):
    logs, _ = small_sweep()
    rows = make_report(logs)
    speeds = [r["mean_speedup"] for r in rows]
    assert speeds == sorted(speeds, reverse=True)
    text = render_report(rows, "text")
    assert "mean_speedup" in text and "lloyd" in text
    csv = render_report(rows, "csv")
    assert csv.count("\n") == len(rows) + 1
    parsed = json.loads(render_report(rows, "json"))
    assert [r["label"] for r in parsed] == [r["label"] for r in rows]
    with pytest.raises(ContractError):
        render_report(rows, "yaml")
    with pytest.raises(ContractError):
        make_report([])


def test_summarize_skips_failed_runs():
    logs, _ = small_sweep()
    logs.append(RunLog(run_id="x", dataset_id="blob", n=250, d=3, k=5,
                       config=KnobConfig().__dict__.copy(), init_seed=0,
                       error="broken"))
    summary = summarize(logs)
    assert summary["lloyd"]["failed"] == 1
