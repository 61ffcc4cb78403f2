"""Recommendation algorithms: training and top-N list generation."""

from __future__ import annotations

from .als import RankALSModel, WRMFModel
from .base import RecModel, RecommendationMatrix, TrainSet, build_R, recommend_top_n
from .baselines import MostPopularModel, RandomModel
from .bpr import BPRModel
from .io import dump_model, export_recommendations, load_model_dump
from .knn import ItemKNNModel, UserKNNModel
from .mf_sgd import BiasedMFModel, SVDppModel
from .params import (
    RATING_MODELS,
    Algorithm,
    HyperParams,
    default_hyperparams,
    parse_algorithm,
)

_MODEL_CLASSES = {
    Algorithm.MOST_POPULAR: MostPopularModel,
    Algorithm.RANDOM: RandomModel,
    Algorithm.USER_KNN: UserKNNModel,
    Algorithm.ITEM_KNN: ItemKNNModel,
    Algorithm.BIASED_MF: BiasedMFModel,
    Algorithm.SVDPP: SVDppModel,
    Algorithm.WRMF: WRMFModel,
    Algorithm.BPR: BPRModel,
    Algorithm.RANK_ALS: RankALSModel,
}


def train(algorithm, train_set, hyper=None, seed=0):
    """Train one algorithm on the given interactions, deterministically.

    Rating-oriented models see the raw ratings; ranking/implicit models
    binarize the training data themselves.
    """
    algorithm = Algorithm(algorithm)
    if hyper is None:
        hyper = default_hyperparams(algorithm)
    hyper.validate()
    model = _MODEL_CLASSES[algorithm](hyper, train_set, seed)
    return model.fit(train_set)


__all__ = [
    "Algorithm",
    "HyperParams",
    "RATING_MODELS",
    "RecModel",
    "RecommendationMatrix",
    "TrainSet",
    "build_R",
    "default_hyperparams",
    "dump_model",
    "export_recommendations",
    "load_model_dump",
    "parse_algorithm",
    "recommend_top_n",
    "train",
    "MostPopularModel",
    "RandomModel",
    "UserKNNModel",
    "ItemKNNModel",
    "BiasedMFModel",
    "SVDppModel",
    "WRMFModel",
    "BPRModel",
    "RankALSModel",
]
