"""Ground-truth oracles and statistical measurements.

Everything here is an independent exhaustive computation used to check
the search structures: closed-ball counts, the doubling-ratio estimate of
the expansion rate, rank error of a returned neighbor, and the Monte
Carlo experiment behind the expected-ball-size argument.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .brute_force import distance_rows
from .dataset import _as_values
from .metric import MetricSpec
from .rbc import sample_representatives


def ball_count(data, center, radius: float, spec: MetricSpec) -> int:
    """Size of the closed ball: points of ``data`` within ``radius`` of center."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    cv = np.asarray(center, dtype=np.float32).reshape(1, -1)
    dists = distance_rows(cv, data, spec, workers=1)[0]
    return int(np.count_nonzero(dists.astype(np.float64) <= np.float64(radius)))


@dataclass
class ExpansionEstimate:
    """Observed doubling ratios |B(x,2r)| / |B(x,r)| over sampled centers and radii."""

    c_max: float
    c_median: float
    samples: int
    radii_per_sample: int
    includes_queries: bool = False


def estimate_expansion_rate(
    data,
    spec: MetricSpec,
    n_samples: int,
    n_radii: int,
    seed: int,
    queries=None,
) -> ExpansionEstimate:
    """Estimate the expansion rate by probing doubling ratios.

    Samples centers uniformly from the point set (the union with
    ``queries`` when given, since the theory's expansion condition covers
    both).  For each center, probes geometrically spaced radii between the
    center's nearest-neighbor distance and half the estimated diameter and
    measures |B(x,2r)| / |B(x,r)|.  Ratios are only taken when
    |B(x,r)| >= 10, which suppresses small-ball noise.  The max ratio is a
    conservative estimate; the median is the practical value for the
    parameter formulas.
    """
    if n_samples < 1 or n_radii < 1:
        raise ValueError("n_samples and n_radii must be >= 1")
    xv = _as_values(data)
    includes_queries = queries is not None
    if includes_queries:
        xv = np.ascontiguousarray(np.vstack((xv, _as_values(queries))))
    n = xv.shape[0]

    rng = np.random.default_rng(seed)
    centers = rng.integers(n, size=min(n_samples, n))

    # Two passes keep memory at O(n): first estimate the diameter from the
    # sampled eccentricities, then probe ratios center by center.
    diameter_est = 0.0
    for c in centers:
        row = distance_rows(xv[c : c + 1], xv, spec, workers=1)[0]
        diameter_est = max(diameter_est, float(row.max()))
    r_hi = diameter_est / 2.0

    ratios: list[float] = []
    exponents = np.linspace(0.0, 1.0, n_radii)
    for c in centers:
        dists = np.sort(distance_rows(xv[c : c + 1], xv, spec, workers=1)[0].astype(np.float64))
        nn_dist = dists[1] if n > 1 else 0.0
        if nn_dist <= 0.0 or r_hi <= nn_dist:
            continue
        # Geometric spacing written as nn * (r_hi/nn)**t so the probe radii
        # scale exactly with the data under power-of-two rescaling.
        radii = nn_dist * (r_hi / nn_dist) ** exponents
        inner = np.searchsorted(dists, radii, side="right")
        outer = np.searchsorted(dists, 2.0 * radii, side="right")
        ok = inner >= 10
        ratios.extend((outer[ok] / inner[ok]).tolist())

    if not ratios:
        return ExpansionEstimate(1.0, 1.0, len(centers), n_radii, includes_queries)
    arr = np.asarray(ratios)
    return ExpansionEstimate(
        c_max=float(arr.max()),
        c_median=float(np.median(arr)),
        samples=len(centers),
        radii_per_sample=n_radii,
        includes_queries=includes_queries,
    )


def rank_error(data, q, returned_id: int, spec: MetricSpec) -> int:
    """How many database points are strictly closer to q than the returned one.

    0 means the exact nearest neighbor (even under distance ties).
    """
    xv = _as_values(data)
    if not 0 <= returned_id < xv.shape[0]:
        raise ValueError(f"returned_id {returned_id} out of range")
    qv = np.asarray(q, dtype=np.float32).reshape(1, -1)
    dists = distance_rows(qv, xv, spec, workers=1)[0]
    return int(np.count_nonzero(dists < dists[returned_id]))


def claim1_counts(
    data,
    n_r: int,
    spec: MetricSpec,
    n_queries: int,
    seed: int,
    queries=None,
) -> np.ndarray:
    """Strictly-closer counts behind the expected-ball-size argument.

    Each trial draws a fresh bernoulli representative sample, computes the
    distance from a held-out query to its nearest representative, and
    counts database points strictly closer than that.  The count is the
    number of failures before the first success of a p = n_r/n coin, so
    its mean converges to n/n_r - 1.  Queries must not come from the
    database; by default they are drawn uniformly from its bounding box.
    """
    xv = _as_values(data)
    n = xv.shape[0]
    rng = np.random.default_rng(seed)
    if queries is None:
        lo = xv.min(axis=0).astype(np.float64)
        hi = xv.max(axis=0).astype(np.float64)
        qv = (lo + rng.random((n_queries, xv.shape[1])) * (hi - lo)).astype(np.float32)
    else:
        qv = _as_values(queries)
        if qv.shape[0] < n_queries:
            raise ValueError(f"need {n_queries} queries, got {qv.shape[0]}")
        qv = qv[:n_queries]

    counts = np.empty(n_queries, dtype=np.int64)
    chunk = 256
    for lo_i in range(0, n_queries, chunk):
        hi_i = min(lo_i + chunk, n_queries)
        rows = distance_rows(qv[lo_i:hi_i], xv, spec, workers=1)
        for i in range(hi_i - lo_i):
            reps = sample_representatives(n, n_r, int(rng.integers(2**63)), mode="bernoulli")
            gamma = rows[i, reps.rep_ids].min()
            counts[lo_i + i] = np.count_nonzero(rows[i] < gamma)
    return counts


def claim1_trial(
    data,
    n_r: int,
    spec: MetricSpec,
    n_queries: int,
    seed: int,
    queries=None,
) -> float:
    """Mean strictly-closer count over fresh representative samples."""
    return float(claim1_counts(data, n_r, spec, n_queries, seed, queries).mean())
