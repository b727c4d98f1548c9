"""Distance functions.

Coordinates are 32-bit floats.  Distances are accumulated in 64-bit
arithmetic and the result is truncated back to 32-bit, so every distance
is a pure function of the two points alone: the same pair always yields
the same value no matter how the surrounding computation is tiled or
threaded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

L2 = "l2"
L1 = "l1"
METRIC_KINDS = (L2, L1)


@dataclass(frozen=True)
class MetricSpec:
    """Which distance function is in force and the point dimension."""

    kind: str
    dim: int

    def __post_init__(self) -> None:
        if self.kind not in METRIC_KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}; expected one of {METRIC_KINDS}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")


@numba.njit(nogil=True, cache=True)
def _l2_block(a, b, out):  # pragma: no cover - compiled
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            acc = 0.0
            for k in range(a.shape[1]):
                diff = np.float64(a[i, k]) - np.float64(b[j, k])
                acc += diff * diff
            out[i, j] = np.float32(np.sqrt(acc))


@numba.njit(nogil=True, cache=True)
def _l1_block(a, b, out):  # pragma: no cover - compiled
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += abs(np.float64(a[i, k]) - np.float64(b[j, k]))
            out[i, j] = np.float32(acc)


def pairwise_distances(a: np.ndarray, b: np.ndarray, spec: MetricSpec) -> np.ndarray:
    """Dense distance block between two row sets.

    Returns a float32 array of shape ``(len(a), len(b))``.  This is the hot
    kernel behind every search operation; inputs must already be finite.
    """
    a = np.ascontiguousarray(a, dtype=np.float32)
    b = np.ascontiguousarray(b, dtype=np.float32)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("pairwise_distances expects 2-D inputs")
    if a.shape[1] != spec.dim or b.shape[1] != spec.dim:
        raise ValueError(
            f"dimension mismatch: inputs have {a.shape[1]} and {b.shape[1]} columns, metric dim is {spec.dim}"
        )
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float32)
    if spec.kind == L2:
        _l2_block(a, b, out)
    else:
        _l1_block(a, b, out)
    return out


def distance(a: np.ndarray, b: np.ndarray, spec: MetricSpec) -> float:
    """Distance between two points, with full argument validation."""
    a = np.asarray(a, dtype=np.float32).reshape(-1)
    b = np.asarray(b, dtype=np.float32).reshape(-1)
    if a.shape[0] != spec.dim or b.shape[0] != spec.dim:
        raise ValueError(f"dimension mismatch: points of dim {a.shape[0]} and {b.shape[0]}, metric dim {spec.dim}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("points must have finite coordinates")
    return float(pairwise_distances(a[None, :], b[None, :], spec)[0, 0])
