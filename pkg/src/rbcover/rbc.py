"""The random ball cover index: build routines and parameter formulas.

A random subset of the database acts as representatives; each
representative owns a list of nearby points.  Both variants are built
with a single brute-force call:

* exact variant: one ``bf_search(X, X[R], k=1)`` assigns every point to
  its nearest representative, giving disjoint ownership lists sorted by
  distance to the representative, plus the radius of each list.
* one-shot variant: one ``bf_search(X[R], X, k=s)`` gives each
  representative the s database points nearest to it; lists overlap.

Index file format ("RBCI"): magic ``RBCI``, version u32, variant u32
(0 exact / 1 one-shot), metric kind u32 (0 l2 / 1 l1), sampling mode u32
(0 bernoulli / 1 fixed-count), seed as two u32 words (lo, hi), rep count,
rep ids, the ownership lists and radii, then the embedded database
matrix (n, d, float32 values).  All integers are unsigned 32-bit
little-endian, all reals 32-bit IEEE-754.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .brute_force import _scan_matrix
from .dataset import DataMatrix, DataError, FormatError
from .metric import L1, L2, MetricSpec

INDEX_MAGIC = b"RBCI"
INDEX_VERSION = 1

BERNOULLI = "bernoulli"
FIXED_COUNT = "fixed-count"
_MODES = (BERNOULLI, FIXED_COUNT)

_VARIANT_CODE = {"exact": 0, "one-shot": 1}
_METRIC_CODE = {L2: 0, L1: 1}


@dataclass(frozen=True)
class RepSet:
    """The sampled representative ids (sorted ascending) and how they were drawn."""

    rep_ids: np.ndarray
    sampling_mode: str
    seed: int

    @property
    def size(self) -> int:
        return len(self.rep_ids)


def _bernoulli_draw(n: int, p: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.flatnonzero(rng.random(n) < p)


def sample_representatives(n: int, n_r: int, seed: int, mode: str = BERNOULLI) -> RepSet:
    """Draw the representative set.

    Bernoulli mode includes each id independently with probability n_r/n
    (expected size n_r); fixed-count mode draws exactly n_r ids without
    replacement.  An empty bernoulli draw is retried once with seed+1.
    """
    if not 1 <= n_r <= n:
        raise ValueError(f"n_r must be in [1, {n}], got {n_r}")
    if mode not in _MODES:
        raise ValueError(f"unknown sampling mode {mode!r}; expected one of {_MODES}")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    if mode == BERNOULLI:
        ids = _bernoulli_draw(n, n_r / n, seed)
        if ids.size == 0:
            ids = _bernoulli_draw(n, n_r / n, seed + 1)
        if ids.size == 0:
            raise ValueError(f"bernoulli sampling produced an empty set twice (n={n}, n_r={n_r})")
    else:
        rng = np.random.default_rng(seed)
        ids = np.sort(rng.choice(n, size=n_r, replace=False))
    return RepSet(ids.astype(np.int64), mode, seed)


@dataclass
class RbcExactIndex:
    """Disjoint ownership partition for the exact search algorithm.

    ``list_ids[p]`` / ``list_dists[p]`` hold the members of representative
    ``reps.rep_ids[p]`` sorted ascending by distance to it; ``radii[p]`` is
    the last (largest) such distance.  Every point belongs to its nearest
    representative, ties to the lowest rep id, so the lists partition
    0..n-1 and each representative sits in its own list at distance 0
    (unless it exactly duplicates a lower-id representative).
    """

    data: DataMatrix
    metric: MetricSpec
    reps: RepSet
    list_ids: list[np.ndarray]
    list_dists: list[np.ndarray]
    radii: np.ndarray

    @property
    def rep_points(self) -> np.ndarray:
        return np.ascontiguousarray(self.data.values[self.reps.rep_ids])

    def owner_positions(self) -> np.ndarray:
        """Map point id -> position of its owning representative."""
        owner = np.empty(self.data.n, dtype=np.int64)
        for pos, ids in enumerate(self.list_ids):
            owner[ids] = pos
        return owner


@dataclass
class RbcOneShotIndex:
    """Overlapping fixed-size ownership lists for one-shot search.

    ``list_ids`` has one row per representative holding the s database
    points nearest to it (lowest-id tie-break).  ``radii`` stores each
    list's largest distance; queries never use it, but diagnostics and
    the conditional success guarantee do.
    """

    data: DataMatrix
    metric: MetricSpec
    reps: RepSet
    list_ids: np.ndarray
    s: int
    radii: np.ndarray

    @property
    def rep_points(self) -> np.ndarray:
        return np.ascontiguousarray(self.data.values[self.reps.rep_ids])


def _resolve_reps(n: int, n_r: int, seed: int, mode: str, rep_ids) -> RepSet:
    if rep_ids is not None:
        ids = np.sort(np.asarray(rep_ids, dtype=np.int64))
        return RepSet(ids, mode, seed)
    return sample_representatives(n, n_r, seed, mode)


def build_exact(
    data: DataMatrix,
    n_r: int,
    spec: MetricSpec,
    seed: int,
    mode: str = BERNOULLI,
    rep_ids=None,
    workers: int | None = None,
) -> RbcExactIndex:
    """Build the exact-search index: one bf_search(X, X[R], k=1) plus sorting.

    ``rep_ids`` overrides sampling (test hook).
    """
    reps = _resolve_reps(data.n, n_r, seed, mode, rep_ids)
    rep_matrix = np.ascontiguousarray(data.values[reps.rep_ids])
    # One brute-force sweep X vs X[R]; ids come back as positions in rep_ids,
    # and the ascending rep_ids order makes the lowest-id tie-break carry over.
    ids_mat, dists_mat = _scan_matrix(data.values, rep_matrix, spec, 1, workers)
    owner = ids_mat[:, 0]
    dist_to_rep = dists_mat[:, 0]

    order = np.lexsort((np.arange(data.n), dist_to_rep, owner))
    owner_sorted = owner[order]
    boundaries = np.searchsorted(owner_sorted, np.arange(reps.size + 1))

    list_ids, list_dists = [], []
    radii = np.zeros(reps.size, dtype=np.float32)
    for pos in range(reps.size):
        members = order[boundaries[pos] : boundaries[pos + 1]]
        list_ids.append(members.astype(np.int64))
        list_dists.append(dist_to_rep[members])
        if members.size:
            radii[pos] = dist_to_rep[members[-1]]
    return RbcExactIndex(data, spec, reps, list_ids, list_dists, radii)


def build_one_shot(
    data: DataMatrix,
    n_r: int,
    s: int,
    spec: MetricSpec,
    seed: int,
    mode: str = BERNOULLI,
    rep_ids=None,
    workers: int | None = None,
) -> RbcOneShotIndex:
    """Build the one-shot index: one bf_search(X[R], X, k=s)."""
    if not 1 <= s <= data.n:
        raise ValueError(f"s must be in [1, {data.n}], got {s}")
    reps = _resolve_reps(data.n, n_r, seed, mode, rep_ids)
    rep_matrix = np.ascontiguousarray(data.values[reps.rep_ids])
    # One brute-force sweep X[R] vs X with k=s; row r is the s-NN list of rep r.
    ids_mat, dists_mat = _scan_matrix(rep_matrix, data.values, spec, s, workers)
    return RbcOneShotIndex(data, spec, reps, ids_mat, s, np.ascontiguousarray(dists_mat[:, -1]))


def standard_params_exact(n: int, c: float) -> int:
    """Representative count that balances the two search stages: ceil(c^1.5 sqrt(n))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if c < 1:
        raise ValueError(f"expansion-rate estimate must be >= 1, got {c}")
    return int(min(n, max(1, math.ceil(c**1.5 * math.sqrt(n)))))


def one_shot_params(n: int, c: float, delta: float) -> tuple[int, int]:
    """Parameter pair n_r = s = ceil(c sqrt(n) sqrt(ln(1/delta))).

    With both set this way the one-shot search returns the true nearest
    neighbor with probability at least 1 - delta.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if c < 1:
        raise ValueError(f"expansion-rate estimate must be >= 1, got {c}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    value = int(min(n, max(1, math.ceil(c * math.sqrt(n) * math.sqrt(math.log(1.0 / delta))))))
    return value, value


def _write_u32(fh, *values: int) -> None:
    fh.write(struct.pack(f"<{len(values)}I", *values))


def save_index(index: RbcExactIndex | RbcOneShotIndex, path) -> None:
    """Serialize an index (with its embedded database) to the RBCI format."""
    variant = "exact" if isinstance(index, RbcExactIndex) else "one-shot"
    seed = index.reps.seed
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        _write_u32(
            fh,
            INDEX_VERSION,
            _VARIANT_CODE[variant],
            _METRIC_CODE[index.metric.kind],
            0 if index.reps.sampling_mode == BERNOULLI else 1,
            seed & 0xFFFFFFFF,
            (seed >> 32) & 0xFFFFFFFF,
            index.reps.size,
        )
        fh.write(index.reps.rep_ids.astype("<u4").tobytes())
        if variant == "exact":
            lengths = np.array([len(ids) for ids in index.list_ids], dtype="<u4")
            fh.write(lengths.tobytes())
            fh.write(np.concatenate(index.list_ids).astype("<u4").tobytes())
            fh.write(np.concatenate(index.list_dists).astype("<f4").tobytes())
        else:
            _write_u32(fh, index.s)
            fh.write(index.list_ids.astype("<u4").tobytes())
        fh.write(index.radii.astype("<f4").tobytes())
        _write_u32(fh, index.data.n, index.data.d)
        fh.write(index.data.values.astype("<f4", copy=False).tobytes())


class _Reader:
    def __init__(self, path):
        with open(path, "rb") as fh:
            self.buf = fh.read()
        self.path = path
        self.pos = 0

    def take(self, nbytes: int) -> memoryview:
        if self.pos + nbytes > len(self.buf):
            raise OSError(f"{self.path}: truncated index file")
        view = memoryview(self.buf)[self.pos : self.pos + nbytes]
        self.pos += nbytes
        return view

    def u32(self, count: int = 1):
        vals = struct.unpack(f"<{count}I", self.take(4 * count))
        return vals[0] if count == 1 else vals

    def array(self, dtype: str, count: int) -> np.ndarray:
        return np.frombuffer(self.take(np.dtype(dtype).itemsize * count), dtype=dtype)


def load_index(path) -> RbcExactIndex | RbcOneShotIndex:
    """Read an index written by :func:`save_index`; exact bitwise round-trip."""
    r = _Reader(path)
    if bytes(r.take(4)) != INDEX_MAGIC:
        raise FormatError(f"{path}: bad magic, expected {INDEX_MAGIC!r}")
    version = r.u32()
    if version != INDEX_VERSION:
        raise FormatError(f"{path}: unsupported index version {version}")
    variant, metric_code, mode_code, seed_lo, seed_hi, n_reps = r.u32(6)
    if variant not in (0, 1) or metric_code not in (0, 1) or mode_code not in (0, 1):
        raise FormatError(f"{path}: invalid variant/metric/mode tags")
    seed = seed_lo | (seed_hi << 32)
    rep_ids = r.array("<u4", n_reps).astype(np.int64)
    reps = RepSet(rep_ids, BERNOULLI if mode_code == 0 else FIXED_COUNT, seed)

    if variant == 0:
        lengths = r.array("<u4", n_reps).astype(np.int64)
        total = int(lengths.sum())
        flat_ids = r.array("<u4", total).astype(np.int64)
        flat_dists = r.array("<f4", total).astype(np.float32)
        radii = r.array("<f4", n_reps).astype(np.float32)
        splits = np.cumsum(lengths)[:-1]
        list_ids = [a.copy() for a in np.split(flat_ids, splits)]
        list_dists = [a.copy() for a in np.split(flat_dists, splits)]
    else:
        s = r.u32()
        list_ids_flat = r.array("<u4", n_reps * s).astype(np.int64)
        radii = r.array("<f4", n_reps).astype(np.float32)

    n, d = r.u32(2)
    values = r.array("<f4", n * d).reshape(n, d)
    try:
        data = DataMatrix(values.copy())
    except DataError:
        raise
    spec = MetricSpec(L2 if metric_code == 0 else L1, d)
    if variant == 0:
        return RbcExactIndex(data, spec, reps, list_ids, list_dists, radii.copy())
    return RbcOneShotIndex(data, spec, reps, list_ids_flat.reshape(n_reps, s), s, radii.copy())
