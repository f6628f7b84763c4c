import logging
import numpy as np
import os
import pandas as pd
import sys

from argparse import ArgumentParser

from dynlmi.bench.scenarios import ScenarioRunner, parse_method, run_scenario_matrix
from dynlmi.config import (
    checkpoints,
    dump_config,
    index_settings,
    load_config,
    load_data,
    ri_grid,
    RunConfig,
    scenarios,
)
from dynlmi.core.fvecs import read_fvecs, write_fvecs
from dynlmi.core.vectors import (
    Dataset,
    knn_bruteforce,
    recall,
    split_queries,
    synthetic_dataset,
)
from dynlmi.dynamize.policy import DynamicIndex
from dynlmi.index.persist import load_index, save_index
from dynlmi.index.tree import build_static, format_pos
from dynlmi.model.classifier import KINDS


def _config(args) -> RunConfig:
    return load_config(args.config) if args.config else RunConfig()


def gen_data(args) -> int:
    dataset = synthetic_dataset(args.n + args.queries, args.dim, args.clusters, args.seed)
    if args.queries:
        dataset, queries = split_queries(dataset, args.queries, args.seed)
        write_fvecs(args.queries_out, queries)
    write_fvecs(args.out, dataset)

    print(f"wrote {len(dataset)} vectors of dimension {args.dim} to {args.out}")
    return 0


def build(args) -> int:
    config = _config(args)
    settings = index_settings(config)
    if args.kind is not None:
        settings = settings._replace(kind=args.kind)
    if args.seed is not None:
        settings = settings._replace(seed=args.seed)

    dataset = read_fvecs(args.data)
    index = build_static(dataset, args.bucket, settings)
    save_index(index, args.out)

    print(
        f"built {len(index.leaves())} buckets over {len(index)} objects "
        f"({index.build_cost.distance_computations} distance computations, "
        f"{index.build_cost.seconds:.2f}s)"
    )
    return 0


def insert(args) -> int:
    index = load_index(args.index)
    data = read_fvecs(args.data)
    data = data[args.start : None if args.count is None else args.start + args.count]

    offset = args.id_offset
    if offset is None:
        offset = int(index.store.ids.max()) + 1 if len(index) > 0 else 0
    data = Dataset(data.vectors, ids=np.arange(offset, offset + len(data)))

    if args.dynamic:
        dynamic = DynamicIndex.wrap(index, _config(args).policy)
        dynamic.sweep()
        dynamic.extend(data)
        if args.log:
            dynamic.log.to_csv(args.log)
        if dynamic.log.stalled:
            print(f"policy sweep stalled: {dynamic.log.stalled}", file=sys.stderr)
        actions = len(dynamic.log)
    else:
        for obj in data:
            index.insert(obj)
        actions = 0

    save_index(index, args.out or args.index)
    print(f"inserted {len(data)} objects, {actions} structural actions, {len(index.leaves())} buckets")
    return 0


def query(args) -> int:
    index = load_index(args.index)
    queries = read_fvecs(args.queries)
    if args.limit is not None:
        queries = queries[: args.limit]

    contents = index.store.dataset() if args.recall else None

    rows = []
    for i, q in enumerate(queries.vectors):
        result = index.search(q, args.k, args.budget)
        row = {
            "query": i,
            "buckets": result.buckets_visited,
            "scanned": result.objects_scanned,
            "nearest": result.neighbors[0][0] if result.neighbors else None,
            "short": result.short,
        }
        if args.recall:
            truth = [id for id, _ in knn_bruteforce(contents, q, args.k)]
            row["recall"] = recall([id for id, _ in result.neighbors], truth, args.k)
        rows.append(row)

    df = pd.DataFrame(rows)
    print(df.to_markdown(index=False))
    if args.recall:
        print(f"\nmean recall: {df['recall'].mean():.4f}")
    return 0


def check(args) -> int:
    index = load_index(args.index)
    violation = index.check_consistency()
    if violation is None:
        print("ok")
        return 0

    where = "-" if violation.pos is None else format_pos(violation.pos)
    print(f"violation ({violation.code}) at {where}: {violation.message}")
    return 1


def stats(args) -> int:
    s = load_index(args.index).stats()
    print(f"objects: {s.object_count}")
    print(f"leaves: {s.leaf_count}, inner nodes: {s.inner_count}")
    print(f"depth: {s.depth} levels, {s.inner_depth} inner")
    print(f"average leaf occupancy: {s.avg_occupancy:.1f}")
    print(f"children per inner node: {s.children_min}-{s.children_max} (mean {s.children_mean:.1f})")
    print()
    print(s.occupancy.to_frame().to_markdown())
    return 0


def bench(args) -> int:
    config = load_config(args.config)
    out = args.out or config.output
    os.makedirs(out, exist_ok=True)

    dataset, queries = load_data(config)
    result = run_scenario_matrix(
        dataset,
        queries,
        scenarios=scenarios(config),
        checkpoints=checkpoints(config, len(dataset)),
        methods=[parse_method(m) for m in config.bench.methods],
        seed=config.seed,
        ri_grid=ri_grid(config),
        k=config.bench.k,
        bucket_size=config.bench.bucket_size,
        policy=config.policy,
        settings=index_settings(config),
        probes=config.bench.probes,
        timing=config.bench.timing,
    )

    result.records.to_csv(os.path.join(out, "bench.csv"), index=False)
    if result.ri_tables is not None:
        result.ri_tables.to_csv(os.path.join(out, "ri_tables.csv"), index=False)
    dump_config(config, os.path.join(out, "config.yaml"))

    summary = result.records.pivot_table(
        index=["QF", "TR", "checkpoint_size"], columns="method", values="AC_proxy"
    )
    print(summary.to_markdown())
    return 0


def optimize_ri(args) -> int:
    config = load_config(args.config)
    dataset, queries = load_data(config)
    points = checkpoints(config, len(dataset))

    runner = ScenarioRunner(
        dataset,
        queries,
        k=config.bench.k,
        bucket_size=config.bench.bucket_size,
        policy=config.policy,
        settings=index_settings(config),
        probes=config.bench.probes,
        timing=config.bench.timing,
        seed=config.seed,
    )
    size = args.size or points[0]
    tuned, tables = runner.tune_rebuild_intervals(scenarios(config), size, ri_grid(config))

    if args.out:
        tables.to_csv(args.out, index=False)
    for scenario, ri in tuned.items():
        print(f"QF={scenario.qf:g} TR={scenario.tr:g}: optimal rebuild interval {ri}")
    return 0


def parser() -> ArgumentParser:
    parser = ArgumentParser(prog="dynlmi", description="Dynamized learned index for k-NN search")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log errors")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset as fvecs")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--clusters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--queries", type=int, default=0, help="also write this many queries")
    p.add_argument("--queries-out", default="queries.fvecs")
    p.set_defaults(fn=gen_data)

    p = sub.add_parser("build", help="build a static single-level index and persist it")
    p.add_argument("--data", required=True, help="fvecs file to index")
    p.add_argument("--bucket", type=int, default=1000, help="target objects per bucket")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=KINDS, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="YAML run config for model settings")
    p.set_defaults(fn=build)

    p = sub.add_parser("insert", help="stream vectors into a persisted index")
    p.add_argument("--index", required=True)
    p.add_argument("--data", required=True, help="fvecs file of vectors to insert")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--id-offset", type=int, default=None, help="first new id (default max id + 1)")
    p.add_argument("--dynamic", action="store_true", help="enforce the restructuring policies")
    p.add_argument("--config", default=None, help="YAML run config for the policy")
    p.add_argument("--log", default=None, help="write the action log as CSV")
    p.add_argument("--out", default=None, help="where to save (default: overwrite --index)")
    p.set_defaults(fn=insert)

    p = sub.add_parser("query", help="k-NN search with a bucket budget")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True, help="fvecs file of query vectors")
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--budget", type=int, default=1)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--recall", action="store_true", help="compare against brute force")
    p.set_defaults(fn=query)

    p = sub.add_parser("bench", help="run the scenario matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output directory (default: config output)")
    p.set_defaults(fn=bench)

    p = sub.add_parser("optimize-ri", help="AC(RI) table and optimal rebuild intervals")
    p.add_argument("--config", required=True)
    p.add_argument("--size", type=int, default=None, help="initial size (default: first checkpoint)")
    p.add_argument("--out", default=None, help="write the AC(RI) table as CSV")
    p.set_defaults(fn=optimize_ri)

    p = sub.add_parser("check", help="consistency report for a persisted index")
    p.add_argument("--index", required=True)
    p.set_defaults(fn=check)

    p = sub.add_parser("stats", help="structure statistics for a persisted index")
    p.add_argument("--index", required=True)
    p.set_defaults(fn=stats)

    return parser


def main(argv=None) -> int:
    args = parser().parse_args(argv)

    level = logging.WARNING
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.ERROR
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")

    try:
        return args.fn(args)
    except (ValueError, KeyError, TypeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
