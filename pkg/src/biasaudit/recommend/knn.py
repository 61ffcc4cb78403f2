"""User- and item-based k-nearest-neighbor recommenders (ranking mode).

Similarities are cosine over the training rating vectors; "pearson" mode
mean-centers each vector over its rated entries first (missing entries count
as zero after centering).  Ranking scores sum the similarities of the k most
similar raters of a candidate item (user-based), or of the k most similar
rated items to the candidate (item-based).
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .base import RecModel
from .params import Algorithm


def _dense_matrix(train):
    X = np.zeros((train.n_users, train.n_items), dtype=np.float64)
    X[train.users, train.items] = train.ratings
    return X


def _center_rows(X, mask):
    """Subtract each row's mean over its observed entries, in place."""
    counts = mask.sum(axis=1)
    sums = X.sum(axis=1)
    means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    X -= means[:, None] * mask
    return X


def _cosine_rows(X):
    norms = np.sqrt((X * X).sum(axis=1))
    denom = np.outer(norms, norms)
    sim = np.divide(X @ X.T, denom, out=np.zeros((len(X), len(X))), where=denom > 0)
    np.fill_diagonal(sim, 0.0)
    return sim


def row_similarity(X_rows, observed_mask, mode):
    """Pairwise similarity between the rows of a rating matrix."""
    X = X_rows.astype(np.float64, copy=True)
    if mode == "pearson":
        _center_rows(X, observed_mask)
    return _cosine_rows(X)


class UserKNNModel(RecModel):
    algorithm = Algorithm.USER_KNN

    def fit(self, train):
        X = _dense_matrix(train)
        mask = np.zeros(X.shape, dtype=np.float64)
        mask[train.users, train.items] = 1.0
        self.sim = row_similarity(X, mask, self.hyper.similarity)
        # descending similarity, ties broken by ascending user index
        self.neighbor_order = np.empty_like(self.sim, dtype=np.int64)
        idx = np.arange(self.n_users)
        for u in range(self.n_users):
            self.neighbor_order[u] = np.lexsort((idx, -self.sim[u]))
        self._indptr = train.indptr.copy()
        self._indices = train.items.copy()
        return self

    def scores(self, user):
        scores = np.zeros(self.n_items, dtype=np.float64)
        counts = np.zeros(self.n_items, dtype=np.int64)
        order = self.neighbor_order[user]
        order = order[order != user]
        _kernels.topk_rater_sum(
            self.sim[user], order, self._indptr, self._indices,
            self.hyper.k_neighbors, scores, counts,
        )
        return scores


class ItemKNNModel(RecModel):
    algorithm = Algorithm.ITEM_KNN

    def fit(self, train):
        X = _dense_matrix(train).T  # items as rows
        mask = np.zeros(X.shape, dtype=np.float64)
        mask[train.items, train.users] = 1.0
        self.sim = row_similarity(X, mask, self.hyper.similarity)
        self._train = train
        return self

    def scores(self, user):
        rated = self._train.items_of(user)
        if len(rated) == 0:
            return np.zeros(self.n_items, dtype=np.float64)
        G = self.sim[:, rated]
        k = self.hyper.k_neighbors
        if len(rated) > k:
            G = np.partition(G, len(rated) - k, axis=1)[:, len(rated) - k:]
        return G.sum(axis=1)
