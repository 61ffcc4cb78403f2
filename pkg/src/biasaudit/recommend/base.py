"""Training data container, model base class, and top-N list generation."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import BiasAuditError
from ..ingest import BinaryMatrix
from .params import Algorithm, HyperParams

_logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainSet:
    """Interactions available to a model, CSR-ordered by (user, item)."""

    n_users: int
    n_items: int
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    indptr: np.ndarray

    @staticmethod
    def from_arrays(n_users, n_items, users, items, ratings):
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        ratings = np.asarray(ratings, dtype=np.float64)
        if len(users) == 0:
            raise BiasAuditError("training data is empty")
        order = np.lexsort((items, users))
        users, items, ratings = users[order], items[order], ratings[order]
        counts = np.bincount(users, minlength=n_users)
        indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        return TrainSet(n_users, n_items, users, items, ratings, indptr)

    @staticmethod
    def from_binary(matrix: BinaryMatrix):
        users = np.repeat(np.arange(matrix.n_users), matrix.row_counts())
        return TrainSet.from_arrays(
            matrix.n_users, matrix.n_items, users, matrix.indices,
            np.ones(matrix.nnz, dtype=np.float64),
        )

    @property
    def n_interactions(self):
        return len(self.users)

    def items_of(self, user):
        return self.items[self.indptr[user]:self.indptr[user + 1]]

    def ratings_of(self, user):
        return self.ratings[self.indptr[user]:self.indptr[user + 1]]

    def user_counts(self):
        return np.diff(self.indptr)

    def item_counts(self):
        return np.bincount(self.items, minlength=self.n_items)

    def global_mean(self):
        return float(self.ratings.mean())

    def binarized(self):
        """Same support with unit ratings (implicit view)."""
        return TrainSet(
            self.n_users, self.n_items, self.users, self.items,
            np.ones(self.n_interactions, dtype=np.float64), self.indptr,
        )


class RecModel:
    """Trained recommender state; subclasses fill algorithm-specific scoring.

    Every model keeps the training popularity counts so the cold-user
    fallback (most-popular ordering) is always available.
    """

    algorithm: Algorithm

    def __init__(self, hyper: HyperParams, train: TrainSet, seed: int):
        self.hyper = hyper
        self.train_seed = int(seed)
        self.n_users = train.n_users
        self.n_items = train.n_items
        self.item_popularity = train.item_counts().astype(np.int64)
        self._user_counts = train.user_counts()

    def fit(self, train: TrainSet):
        raise NotImplementedError

    def scores(self, user):
        """Raw ranking scores over all items (no exclusions applied)."""
        raise NotImplementedError

    def is_cold(self, user):
        return self._user_counts[user] == 0


@dataclass(frozen=True)
class RecommendationMatrix:
    """Per-user ordered top-N lists; also usable as a binary selection matrix."""

    n_users: int
    n_items: int
    ranked: np.ndarray  # (n_users, top_n) item indices
    fold: int = -1

    @property
    def top_n(self):
        return self.ranked.shape[1]

    @property
    def nnz(self):
        return self.ranked.size

    def items_of(self, user):
        return self.ranked[user]


def recommend_top_n(model, user, exclude, top_n):
    """Top-N highest-scoring items outside ``exclude``; ties break by item index."""
    m = model.n_items
    exclude = np.asarray(exclude, dtype=np.int64)
    if m - len(np.unique(exclude)) < top_n:
        raise BiasAuditError(
            f"user {user}: only {m - len(np.unique(exclude))} candidate items, need {top_n}"
        )
    if model.is_cold(user):
        _logger.info("user %d is cold for %s; falling back to popularity order",
                     user, model.algorithm.value)
        s = model.item_popularity.astype(np.float64)
    else:
        s = np.asarray(model.scores(user), dtype=np.float64).copy()
    s[exclude] = -np.inf
    order = np.lexsort((np.arange(m), -s))
    return order[:top_n].astype(np.int64)


def build_R(models, split, cohort, top_n):
    """One RecommendationMatrix per fold, excluding each user's training items."""
    if len(models) != split.k:
        raise BiasAuditError(f"need one model per fold: {len(models)} models, k={split.k}")
    ds = cohort.dataset
    out = []
    for f, model in enumerate(models):
        ranked = np.empty((ds.n_users, top_n), dtype=np.int64)
        per_user = split.folds[f]
        for u in range(ds.n_users):
            train_ids, _test_ids = per_user[u]
            ranked[u] = recommend_top_n(model, u, ds.items[train_ids], top_n)
        out.append(RecommendationMatrix(ds.n_users, ds.n_items, ranked, fold=f))
    return out
