"""biasaudit: bias-disparity auditing for collaborative-filtering recommenders.

The pipeline: ingest a rating dataset, build a genre-pair cohort, split it
userfixed k-fold, train a roster of collaborative-filtering algorithms, emit
top-N recommendation matrices, and quantify how each algorithm shifts group
preference ratios (bias disparity), list calibration, and ranking accuracy.
"""

__version__ = "0.1.0"

from .cohort import (
    CohortStats,
    ExperimentCohort,
    build_experiment_subset,
    cohort_stats,
    select_extreme_users,
)
from .errors import BiasAuditError
from .ingest import (
    BinaryMatrix,
    CategoryWeighting,
    GroupPartition,
    InteractionDataset,
    binarize,
    dataset_fingerprint,
    load_dataset,
    load_movielens,
    load_yelp_restaurants,
    save_dataset,
)
from .metrics import (
    PreferenceReport,
    SignificanceResult,
    bias,
    bias_disparity,
    category_prior,
    group_significance,
    kl_calibration,
    ndcg_at_k,
    preference_ratio,
)
from .recommend import (
    Algorithm,
    HyperParams,
    RecommendationMatrix,
    TrainSet,
    build_R,
    default_hyperparams,
    dump_model,
    export_recommendations,
    load_model_dump,
    recommend_top_n,
    train,
)
from .runner import AuditReport, ExperimentConfig, emit_report, run_experiment
from .split import FoldSplit, export_split_manifest, userfixed_kfold

__all__ = [
    "__version__",
    "Algorithm",
    "AuditReport",
    "BiasAuditError",
    "BinaryMatrix",
    "CategoryWeighting",
    "CohortStats",
    "ExperimentCohort",
    "ExperimentConfig",
    "FoldSplit",
    "GroupPartition",
    "HyperParams",
    "InteractionDataset",
    "PreferenceReport",
    "RecommendationMatrix",
    "SignificanceResult",
    "TrainSet",
    "bias",
    "bias_disparity",
    "binarize",
    "build_R",
    "build_experiment_subset",
    "category_prior",
    "cohort_stats",
    "dataset_fingerprint",
    "default_hyperparams",
    "dump_model",
    "emit_report",
    "export_recommendations",
    "export_split_manifest",
    "load_model_dump",
    "group_significance",
    "kl_calibration",
    "load_dataset",
    "load_movielens",
    "load_yelp_restaurants",
    "ndcg_at_k",
    "preference_ratio",
    "recommend_top_n",
    "run_experiment",
    "save_dataset",
    "select_extreme_users",
    "train",
    "userfixed_kfold",
]
