"""Metric nearest-neighbor search built from a brute-force primitive.

A random subset of the database covers the metric space with one ball per
representative.  Queries then run as two small brute-force scans: either
a single ownership list (one-shot, correct with high probability) or the
lists surviving triangle-inequality pruning (exact).
"""

from .brute_force import (
    BruteForceResult,
    NeighborList,
    bf_search,
    bf_search_subset,
    distance_rows,
    merge_neighbor_lists,
)
from .dataset import (
    DataError,
    DataMatrix,
    FormatError,
    gen_synthetic,
    load_matrix,
    random_project,
    save_matrix,
)
from .eval import (
    ExpansionEstimate,
    ball_count,
    claim1_counts,
    claim1_trial,
    estimate_expansion_rate,
    rank_error,
)
from .metric import L1, L2, MetricSpec, distance, pairwise_distances
from .rbc import (
    BERNOULLI,
    FIXED_COUNT,
    RbcExactIndex,
    RbcOneShotIndex,
    RepSet,
    build_exact,
    build_one_shot,
    load_index,
    one_shot_params,
    sample_representatives,
    save_index,
    standard_params_exact,
)
from .search import (
    SearchStats,
    exact_query,
    exact_query_batch,
    list_cutoff,
    one_shot_query,
    one_shot_query_batch,
    prune_representatives,
    range_query,
)

__version__ = "0.1.0"

__all__ = [
    "BERNOULLI",
    "BruteForceResult",
    "DataError",
    "DataMatrix",
    "ExpansionEstimate",
    "FIXED_COUNT",
    "FormatError",
    "L1",
    "L2",
    "MetricSpec",
    "NeighborList",
    "RbcExactIndex",
    "RbcOneShotIndex",
    "RepSet",
    "SearchStats",
    "ball_count",
    "bf_search",
    "bf_search_subset",
    "build_exact",
    "build_one_shot",
    "claim1_counts",
    "claim1_trial",
    "distance",
    "distance_rows",
    "estimate_expansion_rate",
    "exact_query",
    "exact_query_batch",
    "gen_synthetic",
    "list_cutoff",
    "load_index",
    "load_matrix",
    "merge_neighbor_lists",
    "one_shot_params",
    "one_shot_query",
    "one_shot_query_batch",
    "pairwise_distances",
    "prune_representatives",
    "random_project",
    "range_query",
    "rank_error",
    "sample_representatives",
    "save_index",
    "save_matrix",
    "standard_params_exact",
]
