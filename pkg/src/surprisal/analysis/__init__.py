from .clustering import (
    ClusterReport,
    KMeansResult,
    PCAResult,
    cluster_vs_labels,
    kmeans_cluster,
    pca_project,
    scale_for_clustering,
)
from .distances import DistanceMatrix, distance_matrix, pairwise_group_distance
from .scoring import (
    Confusion,
    EvaluationReport,
    ScoredSeries,
    anomaly_scores,
    auc_score,
    break_even_threshold,
    evaluate,
    threshold_sensitivity,
)
from .variability import (
    Trajectory,
    VariabilityRanking,
    feature_trajectory,
    variability_ranking,
)

__all__ = [
    "ClusterReport",
    "Confusion",
    "DistanceMatrix",
    "EvaluationReport",
    "KMeansResult",
    "PCAResult",
    "ScoredSeries",
    "Trajectory",
    "VariabilityRanking",
    "anomaly_scores",
    "auc_score",
    "break_even_threshold",
    "cluster_vs_labels",
    "distance_matrix",
    "evaluate",
    "feature_trajectory",
    "kmeans_cluster",
    "pairwise_group_distance",
    "pca_project",
    "scale_for_clustering",
    "threshold_sensitivity",
    "variability_ranking",
]
