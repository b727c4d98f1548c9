"""Point-set container, file formats, generators, and random projection.

Binary matrix format ("RBCM"): magic ``RBCM``, format version (u32 LE,
currently 1), point count n (u32 LE), dimension d (u32 LE), then n*d
32-bit IEEE-754 little-endian values in row-major order.  CSV is one
point per line, comma-separated decimals, no header; values printed with
9 significant digits round-trip float32 exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MATRIX_MAGIC = b"RBCM"
MATRIX_VERSION = 1


class FormatError(Exception):
    """File does not conform to the expected on-disk format."""


class DataError(Exception):
    """File decoded but its payload is invalid (non-finite values)."""


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """Dense n x d collection of points, row-major, ids 0..n-1."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 2:
            raise ValueError("DataMatrix values must be 2-D")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("DataMatrix needs n >= 1 and d >= 1")
        if v.dtype != np.float32 or not v.flags.c_contiguous:
            v = np.ascontiguousarray(v, dtype=np.float32)
            object.__setattr__(self, "values", v)
        if not np.isfinite(v).all():
            raise DataError("DataMatrix values must all be finite")
        v.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def _as_values(x) -> np.ndarray:
    return x.values if isinstance(x, DataMatrix) else np.ascontiguousarray(x, dtype=np.float32)


def save_matrix(matrix: DataMatrix, path, fmt: str = "binary") -> None:
    """Write a matrix to ``path`` in the binary RBCM or CSV format."""
    values = matrix.values
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(MATRIX_MAGIC)
            fh.write(struct.pack("<III", MATRIX_VERSION, matrix.n, matrix.d))
            fh.write(values.astype("<f4", copy=False).tobytes())
    elif fmt == "csv":
        np.savetxt(path, values, delimiter=",", fmt="%.9g")
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")


def load_matrix(path, fmt: str = "binary") -> DataMatrix:
    """Read a matrix written by :func:`save_matrix`.

    Binary round-trips are bit-exact.  Raises :class:`FormatError` on a bad
    magic/version, :class:`DataError` on non-finite payloads, and
    :class:`OSError` on truncation.
    """
    if fmt == "binary":
        with open(path, "rb") as fh:
            header = fh.read(16)
            if len(header) < 16:
                raise OSError(f"{path}: truncated header")
            if header[:4] != MATRIX_MAGIC:
                raise FormatError(f"{path}: bad magic {header[:4]!r}, expected {MATRIX_MAGIC!r}")
            version, n, d = struct.unpack("<III", header[4:16])
            if version != MATRIX_VERSION:
                raise FormatError(f"{path}: unsupported format version {version}")
            if n < 1 or d < 1:
                raise FormatError(f"{path}: invalid shape {n}x{d}")
            payload = fh.read(4 * n * d)
            if len(payload) != 4 * n * d:
                raise OSError(f"{path}: truncated payload ({len(payload)} of {4 * n * d} bytes)")
            values = np.frombuffer(payload, dtype="<f4").reshape(n, d)
    elif fmt == "csv":
        try:
            raw = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise FormatError(f"{path}: malformed CSV ({exc})") from exc
        values = raw.astype(np.float32)
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")
    if not np.isfinite(values).all():
        raise DataError(f"{path}: non-finite value in matrix")
    return DataMatrix(np.ascontiguousarray(values))


def gen_synthetic(
    kind: str,
    n: int,
    d: int,
    seed: int,
    n_clusters: int = 8,
    cluster_sigma: float = 0.05,
) -> DataMatrix:
    """Deterministic synthetic point sets.

    ``uniform``: i.i.d. draws from [0,1)^d.  ``grid``: the integer lattice
    {0..side-1}^d, which requires n to be a perfect d-th power.
    ``clusters``: n_clusters centers drawn uniformly, points from isotropic
    Gaussians of width cluster_sigma around them.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    if kind == "uniform":
        rng = np.random.default_rng(seed)
        values = rng.random((n, d), dtype=np.float32)
    elif kind == "grid":
        side = round(n ** (1.0 / d))
        # fp roots can land one off; check neighbors before rejecting
        for cand in (side - 1, side, side + 1):
            if cand >= 1 and cand**d == n:
                side = cand
                break
        else:
            raise ValueError(f"grid requires n to be a perfect {d}-th power, got n={n}")
        axes = np.meshgrid(*([np.arange(side, dtype=np.float32)] * d), indexing="ij")
        values = np.stack([ax.ravel() for ax in axes], axis=1)
    elif kind == "clusters":
        if n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")
        rng = np.random.default_rng(seed)
        centers = rng.random((n_clusters, d))
        assignment = rng.integers(n_clusters, size=n)
        values = (centers[assignment] + cluster_sigma * rng.standard_normal((n, d))).astype(np.float32)
    else:
        raise ValueError(f"unknown generator kind {kind!r}")
    return DataMatrix(np.ascontiguousarray(values))


def random_project(
    matrix: DataMatrix,
    target_dim: int,
    seed: int,
    projection: np.ndarray | None = None,
) -> DataMatrix:
    """Project to ``target_dim`` dims via Y = X P / sqrt(k).

    P has i.i.d. standard-normal entries drawn from ``seed``; distances are
    approximately preserved for target dims well below the ambient one.
    ``projection`` overrides P (test hook).
    """
    d = matrix.d
    if target_dim < 1:
        raise ValueError("target_dim must be >= 1")
    if target_dim > d:
        raise ValueError(f"target_dim {target_dim} exceeds input dimension {d}")
    if projection is None:
        rng = np.random.default_rng(seed)
        projection = rng.standard_normal((d, target_dim))
    elif projection.shape != (d, target_dim):
        raise ValueError(f"projection must have shape {(d, target_dim)}")
    out = (matrix.values.astype(np.float64) @ projection) / np.sqrt(target_dim)
    return DataMatrix(out.astype(np.float32))
