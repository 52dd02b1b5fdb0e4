"""Single entry point exposing the full pipeline:

    gen    seeded synthetic datasets
    gt     exact ground truth via the brute-force oracle
    build  build and save an index
    run    timed experiment producing run records
    serve  REST server wrapping one algorithm
    score  leaderboards from run records
    plot   tradeoff plots (svg or csv)

Relative input paths are also resolved against the ``BIGANN_BENCH_DATA``
environment variable. Every subcommand writes only into its ``--out``
directory. Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .dataset import (
    Metric,
    QueryMode,
    ScalarKind,
    SyntheticSpec,
    generate_synthetic,
    read_knn_gt,
    read_range_gt,
    read_vectors,
    write_knn_gt,
    write_range_gt,
    write_vectors,
)
from .errors import BenchError, ValidationError
from .harness import (
    MAX_QUERY_CONFIGS,
    QueryConfig,
    load_runs,
    persist_runs,
    run_experiment,
)
from .indexes import Params, available_algorithms, create_index, load_index, save_index
from .oracle import brute_force_knn, brute_force_range
from .rest import serve_algorithm
from .scoring import LeaderboardMode, curves_from_runs, emit_tradeoff_plot, leaderboard

DATA_ROOT_ENV = "BIGANN_BENCH_DATA"


def resolve_input(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    root = os.environ.get(DATA_ROOT_ENV)
    if root and not p.is_absolute():
        candidate = Path(root) / p
        if candidate.exists():
            return candidate
    raise ValidationError(f"input file not found: {path}")


def out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_param_file(path: str):
    """Parameter file: one build-parameter map plus up to ten named query
    configurations."""
    p = resolve_input(path)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed parameter file: {exc}")
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: parameter file must be a JSON object")
    unknown = set(doc) - {"build", "queries"}
    if unknown:
        raise ValidationError(f"{path}: unknown parameter file key '{sorted(unknown)[0]}'")
    build = doc.get("build", {})
    if not isinstance(build, dict):
        raise ValidationError(f"{path}: 'build' must be an object")
    queries = doc.get("queries", [])
    if not isinstance(queries, list) or not all(isinstance(q, dict) for q in queries):
        raise ValidationError(f"{path}: 'queries' must be a list of objects")
    if len(queries) > MAX_QUERY_CONFIGS:
        raise ValidationError(
            f"{path}: {len(queries)} query configurations; the limit is {MAX_QUERY_CONFIGS}"
        )
    configs = []
    for i, q in enumerate(queries):
        unknown = set(q) - {"name", "params"}
        if unknown:
            raise ValidationError(
                f"{path}: query config {i}: unknown key '{sorted(unknown)[0]}'"
            )
        configs.append(QueryConfig(name=q.get("name", f"config{i}"),
                                   params=Params.of(q.get("params", {}))))
    return build, configs


def read_gt(path: str):
    p = resolve_input(path)
    name = str(p)
    if name.endswith(".knn.gt"):
        return read_knn_gt(p)
    if name.endswith(".range.gt"):
        return read_range_gt(p)
    raise ValidationError(f"ground-truth file must end in .knn.gt or .range.gt: {path}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    out = out_dir(args)
    kind = ScalarKind(args.kind)
    spec = SyntheticSpec(
        n=args.count,
        dim=args.dim,
        kind=kind,
        n_clusters=args.clusters,
        cluster_std=args.std,
        n_queries=args.num_queries,
        seed=args.seed,
        query_mode=QueryMode(args.query_mode),
    )
    base, queries = generate_synthetic(spec)
    base_path = out / f"{args.name}.base{kind.extension}"
    query_path = out / f"{args.name}.queries{kind.extension}"
    write_vectors(base, base_path)
    write_vectors(queries, query_path)
    print(f"wrote {base_path} ({base.count}x{base.dim} {kind.value})")
    print(f"wrote {query_path} ({queries.count}x{queries.dim} {kind.value})")
    return 0


def cmd_gt(args) -> int:
    if (args.k is None) == (args.radius is None):
        raise ValidationError("exactly one of --k or --radius is required")
    out = out_dir(args)
    base = read_vectors(resolve_input(args.dataset))
    queries = read_vectors(resolve_input(args.queries))
    metric = Metric(args.metric)
    if args.k is not None:
        gt = brute_force_knn(base, queries, args.k, metric, workers=args.workers)
        path = out / f"{args.name}.knn.gt"
        write_knn_gt(gt, path)
        print(f"wrote {path} ({gt.num_queries} queries, k={gt.k})")
    else:
        gt = brute_force_range(base, queries, args.radius, metric, workers=args.workers)
        path = out / f"{args.name}.range.gt"
        write_range_gt(gt, path)
        print(f"wrote {path} ({gt.num_queries} queries, {gt.total} results)")
    return 0


def _build_index(algo: str, dataset, build_params: dict, seed: int | None):
    params = dict(build_params)
    if seed is not None:
        params["seed"] = seed
    index = create_index(algo)
    start = time.perf_counter()
    index.build(dataset, Params.of(params))
    return index, time.perf_counter() - start


def cmd_build(args) -> int:
    out = out_dir(args)
    dataset = read_vectors(resolve_input(args.dataset))
    build_params, _ = load_param_file(args.params) if args.params else ({}, [])
    index, seconds = _build_index(args.algo, dataset, build_params, args.seed)
    path = out / f"{args.name or args.algo}.annidx"
    save_index(index, path)
    print(f"built {args.algo} over {dataset.count} vectors in {seconds:.2f}s -> {path}")
    return 0


def cmd_run(args) -> int:
    out = out_dir(args)
    dataset = read_vectors(resolve_input(args.dataset))
    queries = read_vectors(resolve_input(args.queries))
    gt = read_gt(args.gt)
    build_params, configs = load_param_file(args.params)
    if not configs:
        raise ValidationError("parameter file defines no query configurations")
    if args.index:
        index = load_index(resolve_input(args.index))
        build_seconds = 0.0
    else:
        index, build_seconds = _build_index(args.algo, dataset, build_params, args.seed)
    records = run_experiment(
        index, dataset, queries, gt, configs,
        repeats=args.repeats, workers=args.workers, k=args.k,
        build_seconds=build_seconds,
    )
    runs_path = out / args.runs_file
    persist_runs(records, runs_path, append=True)
    for rec in records:
        print(f"{rec.config}: qps={rec.qps:.1f} accuracy={rec.accuracy:.4f}")
    print(f"appended {len(records)} run records to {runs_path}")
    return 0


def cmd_serve(args) -> int:
    host, _, port = args.listen.partition(":")
    server = serve_algorithm(lambda: create_index(args.algo),
                             host=host or "127.0.0.1", port=int(port or 0))
    print(f"serving algorithm '{args.algo}' at {server.address}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


_MODES = {m.value: m for m in LeaderboardMode}


def cmd_score(args) -> int:
    out = out_dir(args)
    records = []
    for path in args.runs:
        records.extend(load_runs(resolve_input(path)))
    if not records:
        raise ValidationError("no run records found")
    board = leaderboard(
        curves_from_runs(records),
        baseline=args.baseline,
        mode=_MODES[args.mode],
        qps_threshold=args.threshold,
        min_datasets=args.min_datasets,
        min_accuracy=args.min_accuracy,
    )
    path = out / "leaderboard.json"
    path.write_text(json.dumps(board.to_dict(), indent=2, sort_keys=True) + "\n")
    if board.mode is LeaderboardMode.RECALL_AT_QPS:
        for entry in board.entries:
            flag = "" if entry.eligible else "  [ineligible]"
            print(f"{entry.rank}. {entry.algorithm} aggregate={entry.aggregate:+.4f}{flag}")
    else:
        for ds in board.datasets:
            ranked = board.per_dataset_rankings.get(ds, [])
            cells = {e.algorithm: e.cells[ds] for e in board.entries}
            row = ", ".join(f"{a}={cells[a]:.6g}" for a in ranked)
            print(f"{ds}: {row if row else '(no qualifying entries)'}")
    print(f"wrote {path}")
    return 0


def cmd_plot(args) -> int:
    out = out_dir(args)
    records = []
    for path in args.runs:
        records.extend(load_runs(resolve_input(path)))
    if not records:
        raise ValidationError("no run records found")
    curves = curves_from_runs(records)
    # flatten to one curve per algorithm when a single dataset is present
    datasets = {ds for per_ds in curves.values() for ds in per_ds}
    flat: dict = {}
    for algo, per_ds in curves.items():
        for ds, curve in per_ds.items():
            key = algo if len(datasets) == 1 else f"{algo}/{ds}"
            flat[key] = curve
    path = out / f"{args.name}.{args.format}"
    emit_tradeoff_plot(flat, path, fmt=args.format, qps_cutoff=args.threshold)
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bigann-bench",
        description="Benchmarking toolkit for approximate nearest neighbor search",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a seeded synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--name", default="synthetic", help="file name stem")
    p.add_argument("--count", type=int, default=10000, help="number of base vectors")
    p.add_argument("--dim", type=int, default=64, help="vector dimension")
    p.add_argument("--kind", choices=[k.value for k in ScalarKind], default="f32")
    p.add_argument("--clusters", type=int, default=16, help="mixture components")
    p.add_argument("--std", type=float, default=0.0,
                   help="cluster standard deviation (0 = kind default)")
    p.add_argument("--num-queries", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--query-mode", choices=[m.value for m in QueryMode], default="in")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("gt", help="compute exact ground truth")
    p.add_argument("--dataset", required=True, help="base vector file")
    p.add_argument("--queries", required=True, help="query vector file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--name", default="gt", help="file name stem")
    p.add_argument("--k", type=int, default=None, help="neighbors per query (k-NN)")
    p.add_argument("--radius", type=float, default=None,
                   help="squared-L2 radius (range search)")
    p.add_argument("--metric", choices=[m.value for m in Metric], default="l2")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_gt)

    p = sub.add_parser("build", help="build and save an index")
    p.add_argument("--algo", required=True, choices=available_algorithms())
    p.add_argument("--dataset", required=True)
    p.add_argument("--params", default=None, help="parameter file (build section used)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--name", default=None, help="index file stem (default: algo)")
    p.add_argument("--seed", type=int, default=None, help="override build seed")
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("run", help="run a timed experiment")
    p.add_argument("--algo", default="flat", choices=available_algorithms())
    p.add_argument("--dataset", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--params", required=True, help="parameter file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--index", default=None, help="reuse a saved .annidx instead of building")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--k", type=int, default=10, help="neighbors scored per query")
    p.add_argument("--runs-file", default="runs.jsonl")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("serve", help="serve an algorithm over the REST protocol")
    p.add_argument("--algo", required=True, choices=available_algorithms())
    p.add_argument("--listen", default="127.0.0.1:8080", help="host:port")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("score", help="compute a leaderboard from run records")
    p.add_argument("--runs", nargs="+", required=True, help="run record files")
    p.add_argument("--mode", choices=sorted(_MODES), default="recall-at-qps")
    p.add_argument("--threshold", type=float, default=10000.0, help="QPS threshold")
    p.add_argument("--baseline", default="baseline")
    p.add_argument("--min-datasets", type=int, default=3)
    p.add_argument("--min-accuracy", type=float, default=0.9)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("plot", help="emit a tradeoff plot")
    p.add_argument("--runs", nargs="+", required=True, help="run record files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--name", default="tradeoff", help="file name stem")
    p.add_argument("--format", choices=["svg", "csv"], default="svg")
    p.add_argument("--threshold", type=float, default=None, help="QPS cutoff line")
    p.set_defaults(fn=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 2


if __name__ == "__main__":
    sys.exit(main())
