"""Numba kernels for the SGD trainers and KNN scoring.

Kernels are single-threaded on purpose: the per-sample update order is part
of the determinism contract, so parallel schedules must not change results.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def biasedmf_epoch(users, items, ratings, order, P, Q, bu, bi, mu, lr, reg):
    """One SGD pass over ratings in the given order; returns sum of squared errors."""
    f = P.shape[1]
    sse = 0.0
    for k in order:
        u = users[k]
        i = items[k]
        pred = mu + bu[u] + bi[i]
        for l in range(f):
            pred += P[u, l] * Q[i, l]
        e = ratings[k] - pred
        sse += e * e
        bu[u] += lr * (e - reg * bu[u])
        bi[i] += lr * (e - reg * bi[i])
        for l in range(f):
            pul = P[u, l]
            P[u, l] += lr * (e * Q[i, l] - reg * pul)
            Q[i, l] += lr * (e * pul - reg * Q[i, l])
    return sse


@njit(cache=True)
def svdpp_epoch(users, items, ratings, order, P, Q, Y, bu, bi, mu, lr, reg,
                indptr, indices):
    """One SVD++ SGD pass; implicit item factors Y aggregate over each user's
    rated set (indptr/indices give that set per user)."""
    f = P.shape[1]
    sse = 0.0
    z = np.empty(f, dtype=np.float64)
    tq = np.empty(f, dtype=np.float64)
    for k in order:
        u = users[k]
        i = items[k]
        start = indptr[u]
        stop = indptr[u + 1]
        n_u = stop - start
        ru = 1.0 / np.sqrt(n_u)
        for l in range(f):
            z[l] = 0.0
        for jj in range(start, stop):
            j = indices[jj]
            for l in range(f):
                z[l] += Y[j, l]
        for l in range(f):
            z[l] *= ru

        pred = mu + bu[u] + bi[i]
        for l in range(f):
            pred += Q[i, l] * (P[u, l] + z[l])
        e = ratings[k] - pred
        sse += e * e

        bu[u] += lr * (e - reg * bu[u])
        bi[i] += lr * (e - reg * bi[i])
        for l in range(f):
            tq[l] = Q[i, l]
            Q[i, l] += lr * (e * (P[u, l] + z[l]) - reg * Q[i, l])
            P[u, l] += lr * (e * tq[l] - reg * P[u, l])
        for jj in range(start, stop):
            j = indices[jj]
            for l in range(f):
                Y[j, l] += lr * (e * ru * tq[l] - reg * Y[j, l])
    return sse


@njit(cache=True)
def bpr_epoch(us, pos, neg, P, Q, lr, reg):
    """One BPR SGD pass over pre-sampled (user, positive, negative) triples;
    returns the summed log-likelihood of the pass."""
    f = P.shape[1]
    ll = 0.0
    for k in range(len(us)):
        u = us[k]
        i = pos[k]
        j = neg[k]
        x = 0.0
        for l in range(f):
            x += P[u, l] * (Q[i, l] - Q[j, l])
        # ln sigmoid(x), computed stably
        if x > 0.0:
            ll += -np.log1p(np.exp(-x))
        else:
            ll += x - np.log1p(np.exp(x))
        e = 1.0 / (1.0 + np.exp(x))  # sigmoid(-x)
        for l in range(f):
            pul = P[u, l]
            P[u, l] += lr * (e * (Q[i, l] - Q[j, l]) - reg * pul)
            Q[i, l] += lr * (e * pul - reg * Q[i, l])
            Q[j, l] += lr * (-e * pul - reg * Q[j, l])
    return ll


@njit(cache=True)
def topk_rater_sum(sim_row, order, indptr, indices, k, scores, counts):
    """UserKNN ranking scores: per item, sum similarities of its first k raters
    in descending-similarity order.  scores/counts are zeroed caller-side."""
    for oo in range(len(order)):
        v = order[oo]
        s = sim_row[v]
        for jj in range(indptr[v], indptr[v + 1]):
            i = indices[jj]
            if counts[i] < k:
                counts[i] += 1
                scores[i] += s
