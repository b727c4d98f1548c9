"""Query algorithms over a random ball cover index.

Both algorithms are two brute-force calls.  One-shot: find the nearest
representative, scan only its list.  Exact: compute all representative
distances, prune representatives with two triangle-inequality tests, then
scan the surviving lists (cut at a distance threshold) and return the
true k nearest neighbors.

For k > 1 the exact algorithm uses gamma_k, the k-th smallest
representative distance, as the upper bound on the k-th neighbor
distance (valid because representatives are database points).  A
representative survives pruning when

    dist(q, r) < gamma_k + radius(r)      (its ball could reach the bound)
    dist(q, r) <= 3 * gamma_k             (owner of any true neighbor must)

and surviving lists are only scanned up to member distance 4 * gamma_k.
A representative at distance exactly gamma_k is always retained: it is
itself a candidate, but a zero-radius singleton list would fail the
strict first test.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .brute_force import (
    NeighborList,
    _pack_keys,
    _unpack_keys,
    bf_search_subset,
    distance_rows,
    resolve_workers,
)
from .rbc import RbcExactIndex, RbcOneShotIndex

_QUERY_CHUNK = 1024


@dataclass
class SearchStats:
    """Per-query instrumentation.

    ``gamma`` is the k-th smallest representative distance (an upper bound
    on the k-th neighbor distance).  ``dists_step1`` counts the first
    brute-force stage (= number of representatives), ``candidates_examined``
    the second.  The two pruned counts can overlap: a representative killed
    by both tests is counted in both.
    """

    gamma: float
    reps_total: int
    reps_pruned_radius: int
    reps_pruned_3gamma: int
    candidates_examined: int
    dists_step1: int


def prune_representatives(rep_dists: np.ndarray, radii: np.ndarray, gamma_k: float) -> np.ndarray:
    """Positions of representatives that survive both pruning tests.

    Survivors are {r : dist < gamma_k + radius_r and dist <= 3 gamma_k},
    plus any representative at distance <= gamma_k (unconditional, see
    module docstring).  Bounds are evaluated in float64 so float32 inputs
    compare exactly.
    """
    d = np.asarray(rep_dists, dtype=np.float64)
    r = np.asarray(radii, dtype=np.float64)
    g = float(gamma_k)
    survive = (d <= 3.0 * g) & ((d < g + r) | (d <= g))
    return np.flatnonzero(survive)


def list_cutoff(sorted_rep_dists: np.ndarray, threshold: float) -> int:
    """How many leading entries of an ascending list are <= threshold.

    Binary search; inclusive at the boundary.
    """
    return int(np.searchsorted(np.asarray(sorted_rep_dists), np.float64(threshold), side="right"))


def _chunked(n: int, size: int):
    for lo in range(0, n, size):
        yield lo, min(lo + size, n)


def one_shot_query_batch(
    index: RbcOneShotIndex,
    queries,
    k: int = 1,
    workers: int | None = None,
) -> tuple[list[NeighborList], list[SearchStats]]:
    """One-shot search for a batch of queries.

    Each query costs exactly |R| + s distance evaluations: one scan of the
    representatives, one scan of the nearest representative's list.
    """
    qv = np.asarray(queries, dtype=np.float32)
    if qv.ndim == 1:
        qv = qv[None, :]
    if not 1 <= k <= index.s:
        raise ValueError(f"k must be in [1, s={index.s}], got {k}")
    rep_matrix = index.rep_points
    n_reps = rep_matrix.shape[0]

    results: list[NeighborList | None] = [None] * qv.shape[0]
    stats: list[SearchStats | None] = [None] * qv.shape[0]

    def run(span):
        lo, hi = span
        rd = distance_rows(qv[lo:hi], rep_matrix, index.metric, workers=1)
        # nearest rep with lowest-id tie-break via the packed-key argmin
        keys = _pack_keys(rd, np.arange(n_reps, dtype=np.uint64))
        best = np.argmin(keys, axis=1)
        for i in range(hi - lo):
            rep_pos = int(best[i])
            sub = bf_search_subset(qv[lo + i], index.data, index.list_ids[rep_pos], index.metric, k)
            nl = sub.neighbors[0]
            nl.query_id = lo + i
            results[lo + i] = nl
            stats[lo + i] = SearchStats(
                gamma=float(rd[i, rep_pos]),
                reps_total=n_reps,
                reps_pruned_radius=0,
                reps_pruned_3gamma=0,
                candidates_examined=sub.distance_evals,
                dists_step1=n_reps,
            )

    spans = list(_chunked(qv.shape[0], _QUERY_CHUNK))
    workers = resolve_workers(workers)
    if workers == 1 or len(spans) == 1:
        for s in spans:
            run(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, spans))
    return results, stats  # type: ignore[return-value]


def one_shot_query(index: RbcOneShotIndex, q, k: int = 1) -> NeighborList:
    """One-shot search for a single query point."""
    results, _ = one_shot_query_batch(index, np.asarray(q, dtype=np.float32)[None, :], k, workers=1)
    return results[0]


def exact_query_batch(
    index: RbcExactIndex,
    queries,
    k: int = 1,
    workers: int | None = None,
) -> tuple[list[NeighborList], list[SearchStats]]:
    """Exact k-NN search for a batch of queries.

    Stage 1 is one brute-force scan of the representatives (distances
    retained for pruning); stage 2 one brute-force scan of the surviving
    lists per query.  Output is identical to a full scan of the database.
    """
    qv = np.asarray(queries, dtype=np.float32)
    if qv.ndim == 1:
        qv = qv[None, :]
    rep_matrix = index.rep_points
    n_reps = rep_matrix.shape[0]
    if not 1 <= k <= n_reps:
        raise ValueError(f"k must be in [1, |R|={n_reps}] so the stage-1 bound exists, got {k}")
    if k > index.data.n:
        raise ValueError(f"k={k} exceeds database size {index.data.n}")

    radii = index.radii.astype(np.float64)
    results: list[NeighborList | None] = [None] * qv.shape[0]
    stats: list[SearchStats | None] = [None] * qv.shape[0]

    def run(span):
        lo, hi = span
        rd = distance_rows(qv[lo:hi], rep_matrix, index.metric, workers=1)
        for i in range(hi - lo):
            row = rd[i]
            gamma_k = float(np.partition(row, k - 1)[k - 1]) if k > 1 else float(row.min())
            survivors = prune_representatives(row, radii, gamma_k)
            cutoff = 4.0 * gamma_k
            pieces = [index.list_ids[p][: list_cutoff(index.list_dists[p], cutoff)] for p in survivors]
            candidates = pieces[0] if len(pieces) == 1 else np.concatenate(pieces)
            sub = bf_search_subset(qv[lo + i], index.data, candidates, index.metric, k)
            nl = sub.neighbors[0]
            nl.query_id = lo + i
            d64 = row.astype(np.float64)
            results[lo + i] = nl
            stats[lo + i] = SearchStats(
                gamma=gamma_k,
                reps_total=n_reps,
                reps_pruned_radius=int(np.count_nonzero((d64 >= gamma_k + radii) & (d64 > gamma_k))),
                reps_pruned_3gamma=int(np.count_nonzero(d64 > 3.0 * gamma_k)),
                candidates_examined=sub.distance_evals,
                dists_step1=n_reps,
            )

    spans = list(_chunked(qv.shape[0], _QUERY_CHUNK))
    workers = resolve_workers(workers)
    if workers == 1 or len(spans) == 1:
        for s in spans:
            run(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, spans))
    return results, stats  # type: ignore[return-value]


def exact_query(index: RbcExactIndex, q, k: int = 1) -> tuple[NeighborList, SearchStats]:
    """Exact k-NN search for a single query point."""
    results, stats = exact_query_batch(index, np.asarray(q, dtype=np.float32)[None, :], k, workers=1)
    return results[0], stats[0]


def range_query(index: RbcExactIndex, q, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """All points within ``radius`` of q, sorted by (distance, id).

    A representative's list is scanned when dist(q, r) <= radius + radius_r
    (non-strict: a member can sit exactly on the bound), and within a
    scanned list entries beyond radius + dist(q, r) cannot qualify.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    qv = np.asarray(q, dtype=np.float32).reshape(1, -1)
    rd = distance_rows(qv, index.rep_points, index.metric, workers=1)[0].astype(np.float64)
    eps = float(radius)
    scan = np.flatnonzero(rd <= eps + index.radii.astype(np.float64))
    pieces = [index.list_ids[p][: list_cutoff(index.list_dists[p], eps + rd[p])] for p in scan]
    pieces = [p for p in pieces if p.size]
    if not pieces:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float32)
    candidates = np.concatenate(pieces)
    sub = bf_search_subset(qv[0], index.data, candidates, index.metric, k=candidates.size)
    nl = sub.neighbors[0]
    within = nl.dists <= np.float64(eps)
    return nl.ids[within], nl.dists[within]
