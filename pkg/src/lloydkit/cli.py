"""Command-line front end.

Subcommands: gen (synthetic blobs), bench (sweep configurations over
datasets), features (dataset summary vector), truth (label datasets by
selective running), train (fit a configuration model), predict (pick a
configuration for a dataset), report (aggregate run logs).

Exit codes: 0 success, 1 usage error, 2 data or contract error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .bench import (
    gen_gaussian,
    load_dataset,
    make_report,
    parse_algo,
    read_runlogs,
    render_report,
    run_benchmark,
    save_dataset,
    write_runlogs,
)
from .core import ContractError
from .engine import run_engine
from .tree import build_tree
from .tuner import (
    FEATURE_NAMES,
    extract_features,
    load_model,
    parse_truth_line,
    predict_config,
    save_model,
    selective_run,
    train_knn,
    train_tree,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract reserves 2 for
    data errors, so usage problems are remapped to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lloydkit", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate Gaussian blob data as CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k-true", type=int, required=True)
    p.add_argument("--variance", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--labels-out", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="run configurations over datasets")
    p.add_argument("--data", nargs="+", required=True, help="CSV dataset paths")
    p.add_argument("--algo", nargs="+", default=["lloyd", "hamerly", "ball-pure"],
                   help="labels like lloyd, yinyang, search, ball-single+hamerly")
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--iters", type=int, default=10, help="iteration cap")
    p.add_argument("--capacity", type=int, default=30)
    p.add_argument("--init", choices=("random", "kmeanspp"), default="kmeanspp")
    p.add_argument("--validate", action="store_true",
                   help="shadow-check stored bounds against true distances")
    p.add_argument("--out", default=None, help="write run logs (JSONL) here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("features", help="print the 14-entry dataset summary")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--capacity", type=int, default=30)
    p.add_argument("--tree", choices=("ball", "kd"), default="ball")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("truth", help="label datasets by selective running")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--capacity", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--out-bound", required=True, help="bound-head records (JSONL)")
    p.add_argument("--out-index", required=True, help="index-head records (JSONL)")
    p.set_defaults(func=cmd_truth)

    p = sub.add_parser("train", help="fit a configuration model on truth records")
    p.add_argument("--truth", required=True, help="ground-truth JSONL path")
    p.add_argument("--model", choices=("cart", "knn"), default="cart")
    p.add_argument("--head", choices=("bound", "index"), required=True)
    p.add_argument("--max-depth", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="pick a configuration for a dataset")
    p.add_argument("--model-bound", required=True)
    p.add_argument("--model-index", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--capacity", type=int, default=30)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--run", action="store_true", help="also run the chosen configuration")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="aggregate run logs")
    p.add_argument("--logs", required=True, help="run-log JSONL path")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    data, labels = gen_gaussian(args.n, args.d, args.k_true, args.variance, args.seed)
    save_dataset(args.out, data)
    if args.labels_out:
        np.savetxt(args.labels_out, labels, fmt="%d")
    print(f"wrote {data.shape[0]} x {data.shape[1]} points to {args.out}")
    return 0


def cmd_bench(args) -> int:
    datasets = [(os.path.basename(path), load_dataset(path)) for path in args.data]
    configs = [parse_algo(label, capacity=args.capacity, t_max=args.iters)
               for label in args.algo]
    logs, _ = run_benchmark(datasets, args.k, configs, seeds=tuple(args.seeds),
                            init_method=args.init, validate=args.validate)
    if args.out:
        write_runlogs(args.out, logs)
    sys.stdout.write(render_report(make_report(logs), "text"))
    return 0


def cmd_features(args) -> int:
    data = load_dataset(args.data)
    tree = build_tree(data, args.tree, args.capacity)
    feats = extract_features(data, args.k, tree, args.capacity)
    _emit(json.dumps(dict(zip(FEATURE_NAMES, feats.tolist())), indent=2) + "\n", args.out)
    return 0


def cmd_truth(args) -> int:
    bound_lines, index_lines = [], []
    for path in args.data:
        data = load_dataset(path)
        for k in args.k:
            rec = selective_run(data, k, capacity=args.capacity, t_max=args.iters,
                                seed=args.seed, repeats=args.repeats,
                                dataset_id=os.path.basename(path))
            bound_lines.append(rec.head_json("bound"))
            index_lines.append(rec.head_json("index"))
            print(f"{path} k={k}: bound={rec.bound_label} index={rec.index_label}")
    with open(args.out_bound, "w", encoding="utf-8") as fh:
        fh.write("\n".join(bound_lines) + "\n")
    with open(args.out_index, "w", encoding="utf-8") as fh:
        fh.write("\n".join(index_lines) + "\n")
    print(f"wrote {len(bound_lines)} records to {args.out_bound} and {args.out_index}")
    return 0


def cmd_train(args) -> int:
    with open(args.truth, encoding="utf-8") as fh:
        records = [parse_truth_line(line) for line in fh if line.strip()]
    if args.model == "cart":
        model = train_tree(records, max_depth=args.max_depth)
    else:
        model = train_knn(records)
    save_model(model, args.head, args.out)
    print(f"trained {args.model} on {len(records)} records -> {args.out}")
    return 0


def cmd_predict(args) -> int:
    model_bound = load_model(args.model_bound)
    model_index = load_model(args.model_index)
    data = load_dataset(args.data)
    tree = build_tree(data, "ball", args.capacity)
    feats = extract_features(data, args.k, tree, args.capacity)
    config = predict_config(model_bound, model_index, feats,
                            capacity=args.capacity, t_max=args.iters, seed=args.seed)
    print(json.dumps({"label": config.label(), "config": config.__dict__}))
    if args.run:
        res = run_engine(data, args.k, config)
        print(f"converged={res.converged} iterations={len(res.iterations)} "
              f"sse={res.iterations[-1].sse:.6g}")
    return 0


def cmd_report(args) -> int:
    logs = read_runlogs(args.logs)
    _emit(render_report(make_report(logs), args.format), args.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 0
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the contract maps these to 3
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
