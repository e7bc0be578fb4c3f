from .graph import (
    VARIANTS,
    Partition,
    WeightedGraph,
    blend_weights,
    cpm_merge_delta,
    cpm_quality,
    is_connected_community,
)
from .hierarchy import LEVELS, ClusterConfig, Hierarchy, hierarchical_cluster
from .leiden import best_single_move, leiden
from .tuning import (
    GammaRecord,
    GammaSelection,
    adjusted_rand_index,
    auto_tune_gamma,
    gamma_grid,
    separation,
    small_cluster_fraction,
    stability,
)

__all__ = [
    "LEVELS",
    "VARIANTS",
    "ClusterConfig",
    "GammaRecord",
    "GammaSelection",
    "Hierarchy",
    "Partition",
    "WeightedGraph",
    "adjusted_rand_index",
    "auto_tune_gamma",
    "best_single_move",
    "blend_weights",
    "cpm_merge_delta",
    "cpm_quality",
    "gamma_grid",
    "hierarchical_cluster",
    "is_connected_community",
    "leiden",
    "separation",
    "small_cluster_fraction",
    "stability",
]
