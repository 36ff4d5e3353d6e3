"""Likelihood-ratio user similarity and kNN collaborative filtering.

The package scores user pairs on discrete rating data (lira, Pearson,
cosine, Jaccard, bcf), predicts ratings with user-based kNN, evaluates
MAE/RMSE on MovieLens-style splits, and probes each score's ability to
separate planted user clusters on synthetic data.  The ``liracf`` console
script exposes the same functionality as CSV-emitting subcommands.
"""

from .errors import (
    DomainError,
    EmptyEvaluationError,
    EmptyProfileError,
    ParseError,
)
from .ratings import (
    DiffHistogram,
    ItemDistribution,
    RatingMatrix,
    UserStats,
    diff_histogram,
    item_distribution,
    parse_ratings,
    parse_ratings_pair,
    split_random,
    user_stats,
)
from .similarity import (
    SCORE_NAMES,
    BCFSimilarity,
    CosineSimilarity,
    JaccardSimilarity,
    LiRaSimilarity,
    PearsonSimilarity,
    SimilarityMeasure,
    bcf,
    bhattacharyya_coeff,
    chance_diff_probs,
    cluster_diff_probs,
    cosine,
    jaccard,
    lira,
    lira_weights,
    make_similarity,
    pearson,
    score_pair,
)
from .knn import (
    Fallback,
    KNNRatingPredictor,
    NeighborList,
    PredictionRecord,
    neighbors,
    predict,
    predict_all,
)
from .evaluation import (
    ErrorReport,
    EvalSplit,
    GridRow,
    error_report,
    evaluate_grid,
    grid_to_csv,
    mae,
    movielens_splits,
    rmse,
)
from .synthetic import (
    ClusterDataset,
    ClusterParams,
    InterClusterRow,
    ResolutionReport,
    ResolutionRow,
    apply_missing,
    generate_clusters,
    inter_cluster_curve,
    inter_curve_to_csv,
    resolution,
    resolution_grid,
    resolution_to_csv,
)

__version__ = "0.1.0"
