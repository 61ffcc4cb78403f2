"""Algorithm roster and hyperparameters."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from ..errors import BiasAuditError


class Algorithm(str, Enum):
    MOST_POPULAR = "MostPopular"
    RANDOM = "Random"
    USER_KNN = "UserKNN"
    ITEM_KNN = "ItemKNN"
    BIASED_MF = "BiasedMF"
    SVDPP = "SVDpp"
    WRMF = "WRMF"
    BPR = "BPR"
    RANK_ALS = "RankALS"


_ALIASES = {"SVD++": "SVDpp", "svd++": "SVDpp", "svdpp": "SVDpp"}


def parse_algorithm(name):
    name = _ALIASES.get(name, name)
    try:
        return Algorithm(name)
    except ValueError:
        known = ", ".join(a.value for a in Algorithm)
        raise BiasAuditError(f"unknown algorithm {name!r} (known: {known})") from None


# Rating-prediction models train on raw ratings and rank by predicted rating;
# the others train on the binarized selection matrix and rank by native score.
RATING_MODELS = frozenset({Algorithm.BIASED_MF, Algorithm.SVDPP})


@dataclass(frozen=True)
class HyperParams:
    """Knobs shared across the roster; models ignore fields they do not use."""

    f: int = 10
    learn_rate: float = 0.01
    reg: float = 0.02
    epochs: int = 50
    k_neighbors: int = 50
    similarity: str = "pearson"  # 'pearson' or 'cosine'
    alpha_confidence: float = 40.0
    sample_factor: int = 1
    top_n: int = 10

    def validate(self):
        positive = {
            "f": self.f,
            "learn_rate": self.learn_rate,
            "reg": self.reg,
            "epochs": self.epochs,
            "k_neighbors": self.k_neighbors,
            "alpha_confidence": self.alpha_confidence,
            "sample_factor": self.sample_factor,
        }
        for name, value in positive.items():
            if not value > 0:
                raise BiasAuditError(f"hyperparameter {name} must be positive, got {value}")
        if self.top_n < 1:
            raise BiasAuditError(f"top_n must be >= 1, got {self.top_n}")
        if self.similarity not in ("pearson", "cosine"):
            raise BiasAuditError(f"similarity must be 'pearson' or 'cosine', got {self.similarity!r}")

    def override(self, **kwargs):
        return replace(self, **kwargs)


_DEFAULTS = {
    Algorithm.MOST_POPULAR: HyperParams(),
    Algorithm.RANDOM: HyperParams(),
    Algorithm.USER_KNN: HyperParams(k_neighbors=50, similarity="pearson"),
    Algorithm.ITEM_KNN: HyperParams(k_neighbors=50, similarity="cosine"),
    Algorithm.BIASED_MF: HyperParams(f=10, learn_rate=0.01, reg=0.02, epochs=50),
    Algorithm.SVDPP: HyperParams(f=10, learn_rate=0.01, reg=0.02, epochs=30),
    Algorithm.WRMF: HyperParams(f=10, alpha_confidence=40.0, reg=0.01, epochs=15),
    Algorithm.BPR: HyperParams(f=10, learn_rate=0.05, reg=0.01, epochs=100),
    Algorithm.RANK_ALS: HyperParams(f=10, epochs=15),
}


def default_hyperparams(algorithm):
    return _DEFAULTS[Algorithm(algorithm)]
