"""relsift: multi-relational graph learning with reinforcement-guided
neighbor filtering.

A label-aware similarity measure scores each node's neighbors per relation,
a recursive search picks per-relation retention thresholds, and a
relation-aware aggregator builds node embeddings for semi-supervised
classification.
"""

from .graph import (
    GraphError,
    MultiRelationalGraph,
    RelationAdjacency,
    RelationSpec,
    SyntheticSpec,
    empirical_relation_stats,
    generate_synthetic,
    load_graph,
    max_degree,
    save_graph,
)
from .metrics import EvalReport, ari, auc, f1, kmeans, nmi, precision, recall
from .rsrl import RLForest, RLTree, tree_depth, tree_width
from .sampling import RetainedEdges, retained_average_distance, top_p_sample
from .similarity import (
    SimilarityParams,
    fcn_scores,
    node_distance,
    node_similarity,
    similarity_loss_and_grad,
)
from .training import FitResult, TrainConfig, fit, total_loss, undersample_batch

__version__ = "0.1.0"

__all__ = [
    "EvalReport", "FitResult", "GraphError", "MultiRelationalGraph",
    "RLForest", "RLTree", "RelationAdjacency", "RelationSpec",
    "RetainedEdges", "SimilarityParams", "SyntheticSpec", "TrainConfig",
    "ari", "auc", "empirical_relation_stats", "f1", "fcn_scores", "fit",
    "generate_synthetic", "kmeans", "load_graph", "max_degree",
    "nmi", "node_distance", "node_similarity", "precision", "recall",
    "retained_average_distance", "save_graph", "similarity_loss_and_grad",
    "top_p_sample", "total_loss", "tree_depth", "tree_width",
    "undersample_batch",
]
