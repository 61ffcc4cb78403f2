"""Bayesian personalized ranking trained by SGD over sampled triples.

Per epoch the trainer draws ``sample_factor * n_interactions`` (user,
positive, negative) triples: a uniform positive interaction, then a uniform
negative item rejected against the user's positive set.  The per-triple
objective is ``-ln sigmoid(x_ui - x_uj) + reg/2 * (|p_u|^2 + |q_i|^2 + |q_j|^2)``.
"""

from __future__ import annotations

import numpy as np

from ..errors import BiasAuditError, TrainingDivergedError
from . import _kernels
from .base import RecModel
from .params import Algorithm
from .mf_sgd import _init_factors


def sample_triples(train, n_samples, rng):
    """Deterministic vectorized sampling with rejection of false negatives."""
    if int(train.user_counts().max()) >= train.n_items:
        raise BiasAuditError(
            "a user's training set covers every item; BPR cannot sample negatives"
        )
    keys = np.sort(train.users * train.n_items + train.items)
    pos_idx = rng.integers(0, train.n_interactions, size=n_samples)
    us = train.users[pos_idx]
    pos = train.items[pos_idx]
    neg = rng.integers(0, train.n_items, size=n_samples)
    while True:
        probe = np.searchsorted(keys, us * train.n_items + neg)
        probe = np.minimum(probe, len(keys) - 1)
        bad = keys[probe] == us * train.n_items + neg
        if not bad.any():
            break
        neg[bad] = rng.integers(0, train.n_items, size=int(bad.sum()))
    return us, pos, neg


class BPRModel(RecModel):
    algorithm = Algorithm.BPR

    def fit(self, train):
        h = self.hyper
        train = train.binarized()
        rng = np.random.default_rng(self.train_seed)
        self.P = _init_factors(rng, train.n_users, h.f)
        self.Q = _init_factors(rng, train.n_items, h.f)
        per_epoch = h.sample_factor * train.n_interactions
        for epoch in range(h.epochs):
            us, pos, neg = sample_triples(train, per_epoch, rng)
            ll = _kernels.bpr_epoch(us, pos, neg, self.P, self.Q, h.learn_rate, h.reg)
            if not np.isfinite(ll):
                raise TrainingDivergedError(self.algorithm.value, epoch, h.learn_rate)
        return self

    def scores(self, user):
        return self.Q @ self.P[user]


def bpr_loss(P, Q, us, pos, neg, reg):
    x = np.einsum("kf,kf->k", P[us], Q[pos] - Q[neg])
    # -ln sigmoid(x) = max(0, -x) + log1p(exp(-|x|)), stable on both tails
    nll = np.maximum(0.0, -x) + np.log1p(np.exp(-np.abs(x)))
    penalty = (
        (P[us] ** 2).sum(axis=1) + (Q[pos] ** 2).sum(axis=1) + (Q[neg] ** 2).sum(axis=1)
    )
    return float(nll.sum() + 0.5 * reg * penalty.sum())


def bpr_gradient(P, Q, us, pos, neg, reg):
    x = np.einsum("kf,kf->k", P[us], Q[pos] - Q[neg])
    e = 1.0 / (1.0 + np.exp(x))  # sigmoid(-x)
    gP = np.zeros_like(P)
    gQ = np.zeros_like(Q)
    np.add.at(gP, us, -e[:, None] * (Q[pos] - Q[neg]) + reg * P[us])
    np.add.at(gQ, pos, -e[:, None] * P[us] + reg * Q[pos])
    np.add.at(gQ, neg, e[:, None] * P[us] + reg * Q[neg])
    return gP, gQ
