"""Command-line harness: generate data, build indexes, query, benchmark.

Every run prints its fully resolved configuration (defaults materialized,
seed included) so outputs can be reproduced byte for byte.  Exit codes:
0 success, 2 invalid arguments, 3 data/format/I-O error, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .dataset import DataError, FormatError, gen_synthetic, load_matrix, random_project, save_matrix
from .eval import estimate_expansion_rate, rank_error
from .metric import MetricSpec
from .rbc import (
    BERNOULLI,
    FIXED_COUNT,
    RbcExactIndex,
    build_exact,
    build_one_shot,
    load_index,
    one_shot_params,
    save_index,
    standard_params_exact,
)
from .report import render_figures, run_bench, write_report
from .search import exact_query_batch, one_shot_query_batch


def _mode(flag: str) -> str:
    return BERNOULLI if flag == "bernoulli" else FIXED_COUNT


def _echo_config(command: str, args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print(f"config {command} {json.dumps(resolved, sort_keys=True, default=str)}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def cmd_gen(args) -> int:
    matrix = gen_synthetic(args.kind, args.n, args.d, args.seed, n_clusters=args.clusters, cluster_sigma=args.sigma)
    save_matrix(matrix, args.out, args.format)
    print(f"wrote {matrix.n}x{matrix.d} matrix to {args.out} ({args.format})")
    return 0


def cmd_project(args) -> int:
    matrix = load_matrix(args.data, args.format)
    projected = random_project(matrix, args.target_dim, args.seed)
    save_matrix(projected, args.out, args.format)
    print(f"projected {matrix.n}x{matrix.d} -> {projected.n}x{projected.d}, wrote {args.out}")
    return 0


def cmd_build(args) -> int:
    data = load_matrix(args.data, args.format)
    spec = MetricSpec(args.metric, data.d)
    if args.variant == "exact":
        n_r = args.nr if args.nr is not None else standard_params_exact(data.n, 1.0)
        index = build_exact(data, n_r, spec, args.seed, mode=_mode(args.mode), workers=args.workers)
        lengths = np.array([len(ids) for ids in index.list_ids])
        build_evals = data.n * index.reps.size
    else:
        if args.nr is not None and args.s is not None:
            n_r, s = args.nr, args.s
        else:
            n_r_default, s_default = one_shot_params(data.n, 1.0, args.delta)
            n_r = args.nr if args.nr is not None else n_r_default
            s = args.s if args.s is not None else s_default
        index = build_one_shot(data, n_r, s, spec, args.seed, mode=_mode(args.mode), workers=args.workers)
        lengths = np.full(index.reps.size, index.s)
        build_evals = data.n * index.reps.size
    save_index(index, args.out)
    print(
        f"built {args.variant} index: |R|={index.reps.size}, "
        f"list length max={int(lengths.max())} mean={float(lengths.mean()):.1f}, "
        f"build distance evals={build_evals}, wrote {args.out}"
    )
    return 0


def cmd_query(args) -> int:
    index = load_index(args.index)
    queries = load_matrix(args.queries, args.format)
    if queries.d != index.data.d:
        raise ValueError(f"query dim {queries.d} does not match index dim {index.data.d}")
    if isinstance(index, RbcExactIndex):
        results, stats = exact_query_batch(index, queries.values, args.k, workers=args.workers)
    else:
        results, stats = one_shot_query_batch(index, queries.values, args.k, workers=args.workers)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = (
            ["query_id"]
            + [f"id_{j}" for j in range(args.k)]
            + [f"dist_{j}" for j in range(args.k)]
            + ["gamma", "reps_pruned_radius", "reps_pruned_3gamma", "candidates", "evals"]
        )
        writer.writerow(header)
        for nl, st in zip(results, stats):
            writer.writerow(
                [nl.query_id]
                + [int(i) for i in nl.ids]
                + [f"{d:.9g}" for d in nl.dists]
                + [
                    f"{st.gamma:.9g}",
                    st.reps_pruned_radius,
                    st.reps_pruned_3gamma,
                    st.candidates_examined,
                    st.dists_step1 + st.candidates_examined,
                ]
            )
    print(f"answered {len(results)} queries (k={args.k}), wrote {args.out}")
    return 0


def cmd_bench(args) -> int:
    data = load_matrix(args.data, args.format)
    queries = load_matrix(args.queries, args.format)
    if queries.d != data.d:
        raise ValueError(f"query dim {queries.d} does not match data dim {data.d}")
    spec = MetricSpec(args.metric, data.d)
    variants = [v.strip() for v in args.variant.split(",") if v.strip()]
    for v in variants:
        if v not in ("oneshot", "exact", "brute"):
            raise ValueError(f"unknown variant {v!r}")
    rows = run_bench(
        data,
        queries.values,
        spec,
        variants,
        args.k,
        args.nr,
        args.s,
        args.seed,
        _mode(args.mode),
        dataset_name=str(args.data),
        delta=args.delta,
        workers=args.workers,
    )
    write_report(rows, args.out)
    print(f"wrote {len(rows)} bench rows to {args.out}")
    failures = [r for r in rows if r.error]
    for r in failures:
        print(f"cell failed: variant={r.variant} n_r={r.n_r} s={r.s} seed={r.seed}: {r.error}", file=sys.stderr)
    if args.figures:
        for path in render_figures(rows, args.out):
            print(f"wrote figure {path}")
    return 0


def cmd_eval_rank(args) -> int:
    data = load_matrix(args.data, args.format)
    queries = load_matrix(args.queries, args.format)
    spec = MetricSpec(args.metric, data.d)
    with open(args.results, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "query_id" not in reader.fieldnames or "id_0" not in reader.fieldnames:
            raise FormatError(f"{args.results}: expected a results CSV with query_id and id_0 columns")
        pairs = [(int(rec["query_id"]), int(rec["id_0"])) for rec in reader]
    ranks = [rank_error(data, queries.values[qid], rid, spec) for qid, rid in pairs]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["query_id", "returned_id", "rank"])
            for (qid, rid), rank in zip(pairs, ranks):
                writer.writerow([qid, rid, rank])
    arr = np.asarray(ranks, dtype=np.float64)
    print(f"rank error over {len(ranks)} queries: mean={arr.mean():.6g} median={np.median(arr):.6g} max={arr.max():.0f}")
    return 0


def cmd_estimate_c(args) -> int:
    data = load_matrix(args.data, args.format)
    queries = load_matrix(args.queries, args.format).values if args.queries else None
    spec = MetricSpec(args.metric, data.d)
    est = estimate_expansion_rate(data, spec, args.samples, args.radii, args.seed, queries=queries)
    print(
        f"expansion rate estimate: c_max={est.c_max:.4g} c_median={est.c_median:.4g} "
        f"(samples={est.samples}, radii={est.radii_per_sample}, on X u Q={est.includes_queries})"
    )
    c = max(est.c_median, 1.0)
    n_r_exact = standard_params_exact(data.n, c)
    n_r_os, s_os = one_shot_params(data.n, c, args.delta)
    print(f"suggested exact n_r (c=c_median): {n_r_exact}")
    print(f"suggested one-shot n_r=s (c=c_median, delta={args.delta}): {n_r_os}")
    return 0


def _add_common(p: argparse.ArgumentParser, *, metric=True, fmt=True, workers=False, seed=True) -> None:
    if metric:
        p.add_argument("--metric", choices=["l2", "l1"], default="l2", help="distance function")
    if fmt:
        p.add_argument("--format", choices=["binary", "csv"], default="binary", help="matrix file format")
    if workers:
        p.add_argument("--workers", type=int, default=None, help="worker threads (default: all cores)")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="RNG seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rbcover", description=__doc__)
    parser.add_argument("--version", action="version", version=f"rbcover {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--kind", choices=["uniform", "grid", "clusters"], default="uniform")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--clusters", type=int, default=8, help="cluster count for --kind clusters")
    p.add_argument("--sigma", type=float, default=0.05, help="cluster width for --kind clusters")
    p.add_argument("--out", required=True)
    _add_common(p, metric=False)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("project", help="random-project a dataset to fewer dimensions")
    p.add_argument("--data", required=True)
    p.add_argument("--target-dim", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_common(p, metric=False)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("build", help="build an index file")
    p.add_argument("--data", required=True)
    p.add_argument("--variant", choices=["oneshot", "exact"], default="exact")
    p.add_argument("--nr", type=int, default=None, help="representative count (default: theory setting)")
    p.add_argument("--s", type=int, default=None, help="one-shot list size (default: theory setting)")
    p.add_argument("--mode", choices=["bernoulli", "fixed"], default="bernoulli")
    p.add_argument("--delta", type=float, default=0.1, help="target failure probability for defaults")
    p.add_argument("--out", required=True)
    _add_common(p, workers=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="answer queries from an index file")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_common(p, metric=False, seed=False, workers=True)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="benchmark variants against brute force")
    p.add_argument("--data", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--variant", default="oneshot,exact", help="comma-separated: oneshot,exact,brute")
    p.add_argument("--nr", type=_int_list, default=None, help="comma-separated representative counts")
    p.add_argument("--s", type=_int_list, default=None, help="comma-separated one-shot list sizes")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--mode", choices=["bernoulli", "fixed"], default="bernoulli")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--seed", type=_int_list, default=[0], help="comma-separated seeds, one cell per seed")
    p.add_argument("--out", required=True)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True, help="render figures next to the CSV")
    _add_common(p, seed=False, workers=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval-rank", help="exact rank errors for a results CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--results", required=True)
    p.add_argument("--out", default=None)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_eval_rank)

    p = sub.add_parser("estimate-c", help="estimate the expansion rate and suggest parameters")
    p.add_argument("--data", required=True)
    p.add_argument("--queries", default=None, help="optional query set to include in the estimate")
    p.add_argument("--samples", type=int, default=32)
    p.add_argument("--radii", type=int, default=12)
    p.add_argument("--delta", type=float, default=0.1)
    _add_common(p)
    p.set_defaults(func=cmd_estimate_c)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _echo_config(args.command, args)
    try:
        return args.func(args)
    except (FormatError, DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal invariant violation
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
