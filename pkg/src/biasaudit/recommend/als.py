"""Alternating-least-squares trainers: WRMF and RankALS.

Both train on the binarized selection matrix and record their objective after
every full sweep (user pass + item pass).  Each half-pass minimizes the
objective exactly in its block, so the recorded trace must be non-increasing;
training aborts if the objective ever goes non-finite.

WRMF minimizes ``sum_ui c_ui (s_ui - x_u.y_i)^2 + reg * (|X|^2 + |Y|^2)`` with
confidence ``c_ui = 1 + alpha * s_ui``.

RankALS minimizes the pairwise squared ranking objective
``sum_u sum_{i in I_u} sum_{j in I} ((e_ui - e_uj))^2`` with
``e_uv = p_u.q_v - s_uv`` and uniform item support weights, via the
aggregation identities that avoid the quadratic pair enumeration.
"""

from __future__ import annotations

import numpy as np

from ..errors import TrainingDivergedError
from .base import RecModel
from .params import Algorithm
from .mf_sgd import _init_factors


def _solve(A, b):
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(A, b, rcond=None)[0]


# ---------------------------------------------------------------------------
# WRMF


def wrmf_objective(train, X, Y, alpha, reg):
    """Full confidence-weighted objective, computed without the dense matrix."""
    G = Y.T @ Y
    total_sq = float(np.einsum("uf,fg,ug->", X, G, X))  # sum over ALL (u,i) of (x.y)^2
    rhat = np.einsum("kf,kf->k", X[train.users], Y[train.items])
    obs_sq = float((rhat * rhat).sum())
    obs_conf = float(((1.0 + alpha) * (1.0 - rhat) ** 2).sum())
    penalty = reg * (float((X * X).sum()) + float((Y * Y).sum()))
    return total_sq - obs_sq + obs_conf + penalty


def _wrmf_half_sweep(indptr, indices, This, Other, alpha, reg):
    """Exact confidence-weighted least-squares solve for every row of ``This``
    with ``Other`` held fixed; unobserved cells carry confidence 1."""
    f = This.shape[1]
    G = Other.T @ Other
    eye = reg * np.eye(f)
    for r in range(This.shape[0]):
        cols = indices[indptr[r]:indptr[r + 1]]
        if len(cols) == 0:
            # zero observations: the regularized solve collapses to zero
            This[r] = 0.0
            continue
        O = Other[cols]
        A = G + alpha * (O.T @ O) + eye
        b = (1.0 + alpha) * O.sum(axis=0)
        This[r] = _solve(A, b)


class WRMFModel(RecModel):
    algorithm = Algorithm.WRMF

    def fit(self, train):
        h = self.hyper
        train = train.binarized()
        rng = np.random.default_rng(self.train_seed)
        self.P = _init_factors(rng, train.n_users, h.f)
        self.Q = _init_factors(rng, train.n_items, h.f)

        # item-major CSR for the item half-sweep
        by_item = np.lexsort((train.users, train.items))
        item_users = train.users[by_item]
        item_counts = np.bincount(train.items, minlength=train.n_items)
        item_indptr = np.concatenate(([0], np.cumsum(item_counts))).astype(np.int64)

        alpha, reg = h.alpha_confidence, h.reg
        self.objective_trace = [wrmf_objective(train, self.P, self.Q, alpha, reg)]
        for sweep in range(h.epochs):
            _wrmf_half_sweep(train.indptr, train.items, self.P, self.Q, alpha, reg)
            _wrmf_half_sweep(item_indptr, item_users, self.Q, self.P, alpha, reg)
            obj = wrmf_objective(train, self.P, self.Q, alpha, reg)
            if not np.isfinite(obj):
                raise TrainingDivergedError(self.algorithm.value, sweep, float("nan"))
            self.objective_trace.append(obj)
        return self

    def scores(self, user):
        return self.Q @ self.P[user]


# ---------------------------------------------------------------------------
# RankALS (uniform item support weights)


def rankals_objective(train, P, Q):
    """Pairwise objective via the expansion
    ``sum_u [ m*sum_{i in I_u} e_ui^2 - 2*beta_u*sigma_u + n_u*T_u ]`` where
    ``sigma_u = sum_j e_uj``, ``beta_u = sum_{i in I_u} e_ui`` and
    ``T_u = sum_j e_uj^2``."""
    m = train.n_items
    n_u = train.user_counts().astype(np.float64)
    rhat = np.einsum("kf,kf->k", P[train.users], Q[train.items])
    e_obs = rhat - 1.0
    sum_e2 = np.bincount(train.users, weights=e_obs * e_obs, minlength=train.n_users)
    pb = np.bincount(train.users, weights=rhat, minlength=train.n_users)
    G = Q.T @ Q
    qbar = Q.sum(axis=0)
    pGp = ((P @ G) * P).sum(axis=1)
    T = pGp - 2.0 * pb + n_u
    sigma = P @ qbar - n_u
    beta = pb - n_u
    return float((m * sum_e2 - 2.0 * beta * sigma + n_u * T).sum())


class RankALSModel(RecModel):
    algorithm = Algorithm.RANK_ALS

    def fit(self, train):
        h = self.hyper
        train = train.binarized()
        rng = np.random.default_rng(self.train_seed)
        m = train.n_items
        self.P = _init_factors(rng, train.n_users, h.f)
        self.Q = _init_factors(rng, train.n_items, h.f)
        n_u = train.user_counts().astype(np.float64)

        by_item = np.lexsort((train.users, train.items))
        item_users = train.users[by_item]
        item_counts = np.bincount(train.items, minlength=m)
        item_indptr = np.concatenate(([0], np.cumsum(item_counts))).astype(np.int64)

        self.objective_trace = [rankals_objective(train, self.P, self.Q)]
        for sweep in range(h.epochs):
            self._user_pass(train, n_u)
            self._item_pass(train, n_u, item_indptr, item_users)
            obj = rankals_objective(train, self.P, self.Q)
            if not np.isfinite(obj):
                raise TrainingDivergedError(self.algorithm.value, sweep, float("nan"))
            self.objective_trace.append(obj)
        return self

    def _user_pass(self, train, n_u):
        m = train.n_items
        A = self.Q.T @ self.Q
        qbar = self.Q.sum(axis=0)
        for u in range(train.n_users):
            Qu = self.Q[train.items_of(u)]
            bu = Qu.sum(axis=0)
            Mu = Qu.T @ Qu
            lhs = m * Mu - np.outer(qbar, bu) - np.outer(bu, qbar) + n_u[u] * A
            rhs = m * bu - n_u[u] * qbar
            self.P[u] = _solve(lhs, rhs)

    def _item_pass(self, train, n_u, item_indptr, item_users):
        """Gauss-Seidel over items with incremental aggregate refresh.

        For item k with rater set U_k the exact block solve is
        ``[(m-2)*Mk + B] q_k = sum_{u in U_k} [(m-1) + sigma_u^{-k}
        + beta_u^{-k} + (n_u-1)] p_u + sum_{u not in U_k} beta_u p_u`` where
        ``Mk = sum_{U_k} p_u p_u^T`` and ``B = sum_u n_u p_u p_u^T``; the
        ``^-k`` superscript removes the k-term from the running sums.
        """
        P, Q = self.P, self.Q
        m = train.n_items
        B = (P * n_u[:, None]).T @ P
        qbar = Q.sum(axis=0)
        rhat = np.einsum("kf,kf->k", P[train.users], Q[train.items])
        pb = np.bincount(train.users, weights=rhat, minlength=train.n_users)
        sigma = P @ qbar - n_u
        beta = pb - n_u
        s_beta_p = P.T @ beta
        for k in range(m):
            raters = item_users[item_indptr[k]:item_indptr[k + 1]]
            Pu = P[raters]
            e_k = Pu @ Q[k] - 1.0
            Mk = Pu.T @ Pu
            lhs = (m - 2.0) * Mk + B
            coef = (m - 1.0) + (sigma[raters] - e_k) + (beta[raters] - e_k) + (n_u[raters] - 1.0)
            rhs = Pu.T @ coef + (s_beta_p - Pu.T @ beta[raters])
            q_new = _solve(lhs, rhs)
            delta = q_new - Q[k]
            Q[k] = q_new
            qbar += delta
            sigma += P @ delta
            pd = Pu @ delta
            beta[raters] += pd
            s_beta_p += Pu.T @ pd

    def scores(self, user):
        return self.Q @ self.P[user]
