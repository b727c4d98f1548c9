"""Benchmark cells, the delimited report, and its companion figures.

A benchmark run scans a grid of (variant, parameters, seed) cells against
one brute-force baseline.  Speedup is reported two ways: the ratio of
distance-evaluation counts (hardware independent) and the wall-clock
ratio (informational).  The report path writes one CSV row per cell and
renders the classic trade-off figures next to the CSV.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .brute_force import bf_search, distance_rows
from .dataset import DataMatrix
from .metric import MetricSpec
from .rbc import build_exact, build_one_shot, one_shot_params
from .search import exact_query_batch, one_shot_query_batch

RANK_BASELINE_K = 512


@dataclass
class BenchRow:
    """One benchmark cell of the report CSV."""

    dataset: str
    variant: str
    metric: str
    n: int
    d: int
    n_queries: int
    k: int
    n_r: int | None
    s: int | None
    seed: int | None
    build_wall_s: float
    query_wall_s: float
    mean_evals: float
    median_evals: float
    mean_rank: float
    speedup_evals: float
    speedup_wall: float
    error: str = ""


@dataclass
class Baseline:
    """Brute-force reference: per-query eval cost, timing, and top distances."""

    top_dists: np.ndarray  # (n_queries, K) ascending
    evals_per_query: int
    query_wall_s: float


def run_baseline(data: DataMatrix, queries: np.ndarray, spec: MetricSpec, k: int, workers=None) -> Baseline:
    top_k = min(data.n, max(k, RANK_BASELINE_K))
    t0 = time.perf_counter()
    result = bf_search(queries, data, spec, k=top_k, workers=workers)
    wall = time.perf_counter() - t0
    top = np.stack([nl.dists for nl in result.neighbors])
    return Baseline(top, data.n, wall)


def rank_errors(
    data: DataMatrix,
    queries: np.ndarray,
    returned_dists: np.ndarray,
    baseline: Baseline,
    spec: MetricSpec,
) -> np.ndarray:
    """Exact rank (strictly-closer count) of each returned top-1 distance.

    Ranks below the stored baseline depth are read off the baseline; the
    rare deeper ones fall back to a full counting scan.
    """
    top = baseline.top_dists
    ranks = np.empty(len(returned_dists), dtype=np.int64)
    escaped = []
    for i, ret in enumerate(returned_dists):
        if ret <= top[i, -1] or top.shape[1] >= data.n:
            ranks[i] = np.searchsorted(top[i], np.float32(ret), side="left")
        else:
            escaped.append(i)
    if escaped:
        rows = distance_rows(np.ascontiguousarray(queries[escaped]), data, spec)
        for j, i in enumerate(escaped):
            ranks[i] = np.count_nonzero(rows[j] < returned_dists[i])
    return ranks


def run_cell(
    data: DataMatrix,
    queries: np.ndarray,
    spec: MetricSpec,
    variant: str,
    k: int,
    n_r: int | None,
    s: int | None,
    seed: int,
    mode: str,
    baseline: Baseline,
    dataset_name: str,
    workers=None,
) -> BenchRow:
    """Build and query one (variant, params, seed) cell against the baseline."""
    n = data.n
    row = BenchRow(
        dataset=dataset_name,
        variant=variant,
        metric=spec.kind,
        n=n,
        d=data.d,
        n_queries=len(queries),
        k=k,
        n_r=n_r,
        s=s,
        seed=seed,
        build_wall_s=0.0,
        query_wall_s=0.0,
        mean_evals=0.0,
        median_evals=0.0,
        mean_rank=0.0,
        speedup_evals=0.0,
        speedup_wall=0.0,
    )
    try:
        t0 = time.perf_counter()
        if variant == "oneshot":
            index = build_one_shot(data, n_r, s, spec, seed, mode=mode, workers=workers)
            row.build_wall_s = time.perf_counter() - t0
            t0 = time.perf_counter()
            results, stats = one_shot_query_batch(index, queries, k, workers=workers)
        elif variant == "exact":
            index = build_exact(data, n_r, spec, seed, mode=mode, workers=workers)
            row.build_wall_s = time.perf_counter() - t0
            t0 = time.perf_counter()
            results, stats = exact_query_batch(index, queries, k, workers=workers)
        else:
            raise ValueError(f"unknown bench variant {variant!r}")
        row.query_wall_s = time.perf_counter() - t0

        evals = np.array([st.dists_step1 + st.candidates_examined for st in stats], dtype=np.float64)
        returned = np.array([nl.dists[0] for nl in results], dtype=np.float32)
        ranks = rank_errors(data, queries, returned, baseline, spec)
        row.mean_evals = float(evals.mean())
        row.median_evals = float(np.median(evals))
        row.mean_rank = float(ranks.mean())
        row.speedup_evals = baseline.evals_per_query / row.mean_evals
        row.speedup_wall = baseline.query_wall_s / row.query_wall_s if row.query_wall_s > 0 else math.inf
    except Exception as exc:  # per-cell failures stay in the report, run continues
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def default_grid(variant: str, n: int, delta: float = 0.1) -> tuple[list[int], list[int | None]]:
    """Parameter defaults when no grid is given: the theory-backed settings."""
    root = math.ceil(math.sqrt(n))
    if variant == "oneshot":
        n_r, s = one_shot_params(n, 1.0, delta)
        return [n_r], [s]
    return [root], [None]


def run_bench(
    data: DataMatrix,
    queries: np.ndarray,
    spec: MetricSpec,
    variants: list[str],
    k: int,
    nr_values: list[int] | None,
    s_values: list[int] | None,
    seeds: list[int],
    mode: str,
    dataset_name: str,
    delta: float = 0.1,
    workers=None,
) -> list[BenchRow]:
    baseline = run_baseline(data, queries, spec, k, workers=workers)
    rows = [
        BenchRow(
            dataset=dataset_name,
            variant="brute",
            metric=spec.kind,
            n=data.n,
            d=data.d,
            n_queries=len(queries),
            k=k,
            n_r=None,
            s=None,
            seed=None,
            build_wall_s=0.0,
            query_wall_s=baseline.query_wall_s,
            mean_evals=float(baseline.evals_per_query),
            median_evals=float(baseline.evals_per_query),
            mean_rank=0.0,
            speedup_evals=1.0,
            speedup_wall=1.0,
        )
    ]
    for variant in variants:
        if variant == "brute":
            continue
        nr_grid = nr_values if nr_values else default_grid(variant, data.n, delta)[0]
        if variant == "oneshot":
            s_grid = s_values if s_values else default_grid(variant, data.n, delta)[1]
        else:
            s_grid = [None]
        for n_r in nr_grid:
            for s in s_grid:
                for seed in seeds:
                    rows.append(
                        run_cell(
                            data, queries, spec, variant, k, n_r, s, seed, mode, baseline, dataset_name, workers
                        )
                    )
    return rows


def write_report(rows: list[BenchRow], path) -> None:
    names = [f.name for f in fields(BenchRow)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in rows:
            writer.writerow([getattr(row, name) for name in names])


def render_figures(rows: list[BenchRow], csv_path) -> list[Path]:
    """Render the trade-off figures next to the report CSV.

    Returns the list of written figure paths.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    base = Path(csv_path)
    stem = base.with_suffix("")
    written: list[Path] = []
    good = [r for r in rows if not r.error]
    variants = sorted({r.variant for r in good})

    # Speedup as a function of the error rate, log-log; exact ranks of zero
    # are clamped to the axis floor so they stay visible.
    fig, ax = plt.subplots(figsize=(6, 4.5))
    floor = 1e-3
    for variant in variants:
        pts = sorted((max(r.mean_rank, floor), r.speedup_evals) for r in good if r.variant == variant)
        if not pts:
            continue
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=variant)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("mean rank of returned point")
    ax.set_ylabel("speedup over brute force (distance evals)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    out = Path(f"{stem}_speedup_vs_rank.png")
    fig.savefig(out, dpi=120)
    plt.close(fig)
    written.append(out)

    # Work as a function of the swept parameter (s for one-shot, n_r for exact).
    fig, ax = plt.subplots(figsize=(6, 4.5))
    any_pts = False
    for variant in variants:
        if variant == "brute":
            continue
        pts = sorted(
            ((r.s if variant == "oneshot" else r.n_r), r.mean_evals)
            for r in good
            if r.variant == variant and (r.s if variant == "oneshot" else r.n_r) is not None
        )
        if not pts:
            continue
        any_pts = True
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=variant)
    if any_pts:
        ax.set_yscale("log")
        ax.set_xlabel("swept parameter (s for one-shot, n_r for exact)")
        ax.set_ylabel("mean distance evals per query")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        out = Path(f"{stem}_evals_vs_param.png")
        fig.savefig(out, dpi=120)
        written.append(out)
    plt.close(fig)
    return written
