"""Rating-oriented latent factor models trained by SGD.

Both models minimize, per observed rating, ``0.5*e**2`` plus ``reg/2`` times
the squared norms of every parameter touched by that rating.  The full-batch
loss/gradient evaluators below implement exactly that objective and exist so
the stochastic updates can be checked against finite differences.
"""

from __future__ import annotations

import numpy as np

from ..errors import TrainingDivergedError
from . import _kernels
from .base import RecModel
from .params import Algorithm

INIT_SCALE = 0.01


def _init_factors(rng, n, f):
    return rng.uniform(-INIT_SCALE, INIT_SCALE, size=(n, f))


class BiasedMFModel(RecModel):
    algorithm = Algorithm.BIASED_MF

    def fit(self, train):
        h = self.hyper
        rng = np.random.default_rng(self.train_seed)
        self.mu = train.global_mean()
        self.P = _init_factors(rng, train.n_users, h.f)
        self.Q = _init_factors(rng, train.n_items, h.f)
        self.bu = np.zeros(train.n_users)
        self.bi = np.zeros(train.n_items)
        n = train.n_interactions
        for epoch in range(h.epochs):
            order = rng.permutation(n)
            sse = _kernels.biasedmf_epoch(
                train.users, train.items, train.ratings, order,
                self.P, self.Q, self.bu, self.bi, self.mu, h.learn_rate, h.reg,
            )
            if not np.isfinite(sse):
                raise TrainingDivergedError(self.algorithm.value, epoch, h.learn_rate)
        return self

    def scores(self, user):
        return self.mu + self.bu[user] + self.bi + self.Q @ self.P[user]

    def training_rmse(self, train):
        pred = (
            self.mu + self.bu[train.users] + self.bi[train.items]
            + np.einsum("kf,kf->k", self.P[train.users], self.Q[train.items])
        )
        return float(np.sqrt(np.mean((train.ratings - pred) ** 2)))


class SVDppModel(RecModel):
    algorithm = Algorithm.SVDPP

    def fit(self, train):
        h = self.hyper
        rng = np.random.default_rng(self.train_seed)
        self.mu = train.global_mean()
        self.P = _init_factors(rng, train.n_users, h.f)
        self.Q = _init_factors(rng, train.n_items, h.f)
        self.Y = _init_factors(rng, train.n_items, h.f)
        self.bu = np.zeros(train.n_users)
        self.bi = np.zeros(train.n_items)
        n = train.n_interactions
        for epoch in range(h.epochs):
            order = rng.permutation(n)
            sse = _kernels.svdpp_epoch(
                train.users, train.items, train.ratings, order,
                self.P, self.Q, self.Y, self.bu, self.bi, self.mu,
                h.learn_rate, h.reg, train.indptr, train.items,
            )
            if not np.isfinite(sse):
                raise TrainingDivergedError(self.algorithm.value, epoch, h.learn_rate)
        # cache each user's implicit-feedback term for scoring
        self.Z = np.zeros_like(self.P)
        for u in range(train.n_users):
            rated = train.items_of(u)
            if len(rated):
                self.Z[u] = self.Y[rated].sum(axis=0) / np.sqrt(len(rated))
        return self

    def scores(self, user):
        return self.mu + self.bu[user] + self.bi + self.Q @ (self.P[user] + self.Z[user])


# ---------------------------------------------------------------------------
# Full-batch objective evaluators (finite-difference oracles live in tests)


def biasedmf_loss(train, mu, P, Q, bu, bi, reg):
    e = train.ratings - (
        mu + bu[train.users] + bi[train.items]
        + np.einsum("kf,kf->k", P[train.users], Q[train.items])
    )
    penalty = (
        bu[train.users] ** 2 + bi[train.items] ** 2
        + (P[train.users] ** 2).sum(axis=1) + (Q[train.items] ** 2).sum(axis=1)
    )
    return float(0.5 * (e * e).sum() + 0.5 * reg * penalty.sum())


def biasedmf_gradient(train, mu, P, Q, bu, bi, reg):
    us, its = train.users, train.items
    e = train.ratings - (
        mu + bu[us] + bi[its] + np.einsum("kf,kf->k", P[us], Q[its])
    )
    gbu = np.zeros_like(bu)
    gbi = np.zeros_like(bi)
    gP = np.zeros_like(P)
    gQ = np.zeros_like(Q)
    np.add.at(gbu, us, -e + reg * bu[us])
    np.add.at(gbi, its, -e + reg * bi[its])
    np.add.at(gP, us, -e[:, None] * Q[its] + reg * P[us])
    np.add.at(gQ, its, -e[:, None] * P[us] + reg * Q[its])
    return gP, gQ, gbu, gbi


def _svdpp_predict(train, mu, P, Q, Y, bu, bi):
    Z = np.zeros_like(P)
    root_nu = np.zeros(train.n_users)
    for u in range(train.n_users):
        rated = train.items_of(u)
        if len(rated):
            root_nu[u] = 1.0 / np.sqrt(len(rated))
            Z[u] = Y[rated].sum(axis=0) * root_nu[u]
    pred = (
        mu + bu[train.users] + bi[train.items]
        + np.einsum("kf,kf->k", P[train.users] + Z[train.users], Q[train.items])
    )
    return pred, Z, root_nu


def svdpp_loss(train, mu, P, Q, Y, bu, bi, reg):
    pred, _, _ = _svdpp_predict(train, mu, P, Q, Y, bu, bi)
    e = train.ratings - pred
    y_norms = (Y ** 2).sum(axis=1)
    penalty = 0.0
    for k in range(train.n_interactions):
        u, i = train.users[k], train.items[k]
        penalty += (
            bu[u] ** 2 + bi[i] ** 2 + (P[u] ** 2).sum() + (Q[i] ** 2).sum()
            + y_norms[train.items_of(u)].sum()
        )
    return float(0.5 * (e * e).sum() + 0.5 * reg * penalty)


def svdpp_gradient(train, mu, P, Q, Y, bu, bi, reg):
    pred, Z, root_nu = _svdpp_predict(train, mu, P, Q, Y, bu, bi)
    e = train.ratings - pred
    us, its = train.users, train.items
    gbu = np.zeros_like(bu)
    gbi = np.zeros_like(bi)
    gP = np.zeros_like(P)
    gQ = np.zeros_like(Q)
    gY = np.zeros_like(Y)
    np.add.at(gbu, us, -e + reg * bu[us])
    np.add.at(gbi, its, -e + reg * bi[its])
    np.add.at(gP, us, -e[:, None] * Q[its] + reg * P[us])
    np.add.at(gQ, its, -e[:, None] * (P[us] + Z[us]) + reg * Q[its])
    for k in range(train.n_interactions):
        u, i = us[k], its[k]
        rated = train.items_of(u)
        gY[rated] += -e[k] * root_nu[u] * Q[i] + reg * Y[rated]
    return gP, gQ, gY, gbu, gbi
