"""The data-parallel brute-force primitive.

Every heavy computation in this package is a batch of linear scans: a
distance phase that fills a query x database block (tile by tile), and a
comparison phase that reduces each row to its k best entries by pairwise
merging, like a parallel reduce over an inverted binary tree.

Selection works on packed 64-bit keys: the float32 distance's bit pattern
(order-preserving for non-negative floats) in the high word and the point
id in the low word.  The k smallest keys are then exactly the k nearest
points with ties broken by lowest id, no matter how the scan was tiled or
scheduled, which makes results bit-identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import _as_values
from .metric import MetricSpec, pairwise_distances

DEFAULT_TILE_QUERIES = 256
DEFAULT_TILE_POINTS = 1024

_ID_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        return os.cpu_count() or 1
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return workers


@dataclass
class NeighborList:
    """k nearest points for one query: ids ascending by (distance, id)."""

    query_id: int
    ids: np.ndarray
    dists: np.ndarray

    @property
    def k(self) -> int:
        return len(self.ids)


@dataclass
class BruteForceResult:
    """Search output plus the exact number of distance evaluations spent."""

    neighbors: list[NeighborList] = field(default_factory=list)
    distance_evals: int = 0


def _pack_keys(dists: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Pack (distance, id) into one sortable uint64 per entry.

    Requires non-negative finite distances and ids < 2**32.
    """
    bits = np.ascontiguousarray(dists, dtype=np.float32).view(np.uint32).astype(np.uint64)
    return (bits << _SHIFT) | ids.astype(np.uint64)


def _unpack_keys(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ids = (keys & _ID_MASK).astype(np.int64)
    dists = (keys >> _SHIFT).astype(np.uint32).view(np.float32)
    return ids, dists


def _keep_k(keys: np.ndarray, k: int) -> np.ndarray:
    """Per-row k smallest keys of a 2-D key block (unsorted)."""
    if keys.shape[1] <= k:
        return keys
    idx = np.argpartition(keys, k - 1, axis=1)[:, :k]
    return np.take_along_axis(keys, idx, axis=1)


def _merge_key_tree(fragments: list[np.ndarray], k: int) -> np.ndarray:
    """Pairwise (binary tree) reduce of per-tile key fragments."""
    while len(fragments) > 1:
        merged = []
        for i in range(0, len(fragments) - 1, 2):
            merged.append(_keep_k(np.concatenate((fragments[i], fragments[i + 1]), axis=1), k))
        if len(fragments) % 2:
            merged.append(fragments[-1])
        fragments = merged
    return fragments[0]


def merge_neighbor_lists(a: NeighborList, b: NeighborList, k: int) -> NeighborList:
    """Merge two partial results (over disjoint id sets) into the best k.

    Pure and associative: merging in any grouping or order yields the same
    list, which is what makes the parallel reduce deterministic.
    """
    keys = np.concatenate((_pack_keys(a.dists, a.ids), _pack_keys(b.dists, b.ids)))
    keys = np.sort(keys)[: min(k, len(keys))]
    ids, dists = _unpack_keys(keys)
    return NeighborList(a.query_id, ids, dists)


def _scan_rows(
    q_block: np.ndarray,
    data: np.ndarray,
    spec: MetricSpec,
    k: int,
    tile_points: int,
) -> np.ndarray:
    """Top-k keys (sorted per row) for a block of queries over all of data."""
    fragments = []
    for x0 in range(0, data.shape[0], tile_points):
        x1 = min(x0 + tile_points, data.shape[0])
        block = pairwise_distances(q_block, data[x0:x1], spec)
        ids = np.arange(x0, x1, dtype=np.uint64)
        fragments.append(_keep_k((block.view(np.uint32).astype(np.uint64) << _SHIFT) | ids[None, :], k))
    return np.sort(_merge_key_tree(fragments, k), axis=1)


def _check_dims(qv: np.ndarray, xv: np.ndarray, spec: MetricSpec) -> None:
    if qv.ndim != 2 or xv.ndim != 2:
        raise ValueError("expected 2-D query and database arrays")
    if qv.shape[1] != spec.dim or xv.shape[1] != spec.dim:
        raise ValueError(
            f"dimension mismatch: queries d={qv.shape[1]}, database d={xv.shape[1]}, metric dim={spec.dim}"
        )


def _parallel_spans(n_rows: int, tile_queries: int) -> list[tuple[int, int]]:
    return [(q0, min(q0 + tile_queries, n_rows)) for q0 in range(0, n_rows, tile_queries)]


def _scan_matrix(
    qv: np.ndarray,
    xv: np.ndarray,
    spec: MetricSpec,
    k: int,
    workers: int | None,
    tile_queries: int = DEFAULT_TILE_QUERIES,
    tile_points: int = DEFAULT_TILE_POINTS,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized core scan: per query row, ids and dists of the k nearest."""
    spans = _parallel_spans(qv.shape[0], tile_queries)

    def run(span):
        q0, q1 = span
        return _scan_rows(qv[q0:q1], xv, spec, k, tile_points)

    workers = resolve_workers(workers)
    if workers == 1 or len(spans) == 1:
        parts = [run(s) for s in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, spans))
    keys = parts[0] if len(parts) == 1 else np.vstack(parts)
    return _unpack_keys(keys)


def bf_search(
    queries,
    data,
    spec: MetricSpec,
    k: int,
    workers: int | None = None,
    tile_queries: int = DEFAULT_TILE_QUERIES,
    tile_points: int = DEFAULT_TILE_POINTS,
) -> BruteForceResult:
    """Exact k nearest neighbors of every query by exhaustive scan.

    Cost is exactly ``len(queries) * len(data)`` distance evaluations.
    Results are deterministic for any worker count and tile size.
    """
    qv = _as_values(queries)
    xv = _as_values(data)
    _check_dims(qv, xv, spec)
    if not 1 <= k <= xv.shape[0]:
        raise ValueError(f"k must be in [1, {xv.shape[0]}], got {k}")
    ids, dists = _scan_matrix(qv, xv, spec, k, workers, tile_queries, tile_points)
    neighbors = [NeighborList(q, ids[q], dists[q]) for q in range(qv.shape[0])]
    return BruteForceResult(neighbors, qv.shape[0] * xv.shape[0])


def bf_search_subset(
    q,
    data,
    subset_ids,
    spec: MetricSpec,
    k: int,
) -> BruteForceResult:
    """Exact k-NN of a single query restricted to the listed database rows.

    ``subset_ids`` must be duplicate-free; reported ids are in the global
    id space of ``data``.
    """
    qv = np.asarray(q, dtype=np.float32).reshape(1, -1)
    xv = _as_values(data)
    _check_dims(qv, xv, spec)
    ids = np.asarray(subset_ids, dtype=np.int64).reshape(-1)
    if ids.size == 0:
        raise ValueError("subset id list is empty")
    if ids.min() < 0 or ids.max() >= xv.shape[0]:
        raise ValueError("subset id out of range")
    if np.unique(ids).size != ids.size:
        raise ValueError("duplicate id in subset list")
    if not 1 <= k <= ids.size:
        raise ValueError(f"k must be in [1, {ids.size}], got {k}")

    block = pairwise_distances(qv, np.ascontiguousarray(xv[ids]), spec)
    keys = np.sort(_keep_k(_pack_keys(block[0], ids)[None, :], k), axis=1)
    out_ids, out_dists = _unpack_keys(keys[0])
    return BruteForceResult([NeighborList(0, out_ids, out_dists)], ids.size)


def distance_rows(
    queries,
    data,
    spec: MetricSpec,
    workers: int | None = None,
    tile_queries: int = DEFAULT_TILE_QUERIES,
    tile_points: int = DEFAULT_TILE_POINTS,
) -> np.ndarray:
    """Full |queries| x |data| float32 distance matrix (the distance phase alone).

    Materializes the whole block; callers with large query sets should chunk.
    """
    qv = _as_values(queries)
    xv = _as_values(data)
    _check_dims(qv, xv, spec)
    spans = _parallel_spans(qv.shape[0], tile_queries)
    out = np.empty((qv.shape[0], xv.shape[0]), dtype=np.float32)

    def run(span):
        q0, q1 = span
        for x0 in range(0, xv.shape[0], tile_points):
            x1 = min(x0 + tile_points, xv.shape[0])
            out[q0:q1, x0:x1] = pairwise_distances(qv[q0:q1], xv[x0:x1], spec)

    workers = resolve_workers(workers)
    if workers == 1 or len(spans) == 1:
        for s in spans:
            run(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, spans))
    return out
