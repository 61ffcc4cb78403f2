"""Finite-difference gradient checks and ALS objective laws.

The SGD models expose full-batch loss/gradient evaluators implementing the
exact objective their updates descend; these are verified here against
central finite differences.  The ALS models are verified against brute-force
objective recomputation, per-sweep monotonicity, and block stationarity.
"""

import numpy as np
import pytest

from biasaudit.recommend import Algorithm, HyperParams, TrainSet, train
from biasaudit.recommend.bpr import bpr_gradient, bpr_loss, sample_triples
from biasaudit.recommend.als import rankals_objective, wrmf_objective
from biasaudit.recommend.mf_sgd import (
    biasedmf_gradient,
    biasedmf_loss,
    svdpp_gradient,
    svdpp_loss,
)

GRAD_RTOL = 1e-4
N_PROBES = 10


def _tiny_train(seed=0, n_users=4, n_items=5, per_user=3):
    rng = np.random.default_rng(seed)
    rows = []
    for u in range(n_users):
        for i in rng.choice(n_items, size=per_user, replace=False):
            rows.append((u, int(i), int(rng.integers(1, 6))))
    return TrainSet.from_arrays(
        n_users, n_items,
        [r[0] for r in rows], [r[1] for r in rows], [float(r[2]) for r in rows],
    )


def _check_gradient(loss_fn, grad_vec, theta, rng):
    """Central differences at N_PROBES random coordinates of theta."""
    worst = 0.0
    for idx in rng.choice(theta.size, size=N_PROBES, replace=False):
        h = 1e-6 * max(1.0, abs(theta[idx]))
        up = theta.copy()
        up[idx] += h
        dn = theta.copy()
        dn[idx] -= h
        numeric = (loss_fn(up) - loss_fn(dn)) / (2 * h)
        analytic = grad_vec[idx]
        rel = abs(numeric - analytic) / max(1e-8, abs(numeric) + abs(analytic))
        worst = max(worst, rel)
    assert worst < GRAD_RTOL, f"max relative gradient error {worst:.3e}"


class TestGradientChecks:
    def test_biasedmf(self):
        tset = _tiny_train()
        rng = np.random.default_rng(42)
        f = 3
        mu = tset.global_mean()
        reg = 0.05
        shapes = [(tset.n_users, f), (tset.n_items, f), (tset.n_users,), (tset.n_items,)]
        sizes = [int(np.prod(s)) for s in shapes]

        def unpack(vec):
            out, k = [], 0
            for s, size in zip(shapes, sizes):
                out.append(vec[k:k + size].reshape(s))
                k += size
            return out

        theta = rng.normal(0, 0.5, size=sum(sizes))

        def loss_fn(vec):
            P, Q, bu, bi = unpack(vec)
            return biasedmf_loss(tset, mu, P, Q, bu, bi, reg)

        P, Q, bu, bi = unpack(theta)
        gP, gQ, gbu, gbi = biasedmf_gradient(tset, mu, P, Q, bu, bi, reg)
        grad = np.concatenate([gP.ravel(), gQ.ravel(), gbu, gbi])
        _check_gradient(loss_fn, grad, theta, rng)

    def test_svdpp(self):
        tset = _tiny_train(seed=1)
        rng = np.random.default_rng(43)
        f = 3
        mu = tset.global_mean()
        reg = 0.05
        shapes = [(tset.n_users, f), (tset.n_items, f), (tset.n_items, f),
                  (tset.n_users,), (tset.n_items,)]
        sizes = [int(np.prod(s)) for s in shapes]

        def unpack(vec):
            out, k = [], 0
            for s, size in zip(shapes, sizes):
                out.append(vec[k:k + size].reshape(s))
                k += size
            return out

        theta = rng.normal(0, 0.5, size=sum(sizes))

        def loss_fn(vec):
            P, Q, Y, bu, bi = unpack(vec)
            return svdpp_loss(tset, mu, P, Q, Y, bu, bi, reg)

        P, Q, Y, bu, bi = unpack(theta)
        gP, gQ, gY, gbu, gbi = svdpp_gradient(tset, mu, P, Q, Y, bu, bi, reg)
        grad = np.concatenate([gP.ravel(), gQ.ravel(), gY.ravel(), gbu, gbi])
        _check_gradient(loss_fn, grad, theta, rng)

    def test_bpr(self):
        tset = _tiny_train(seed=2).binarized()
        rng = np.random.default_rng(44)
        us, pos, neg = sample_triples(tset, 30, rng)
        f = 3
        reg = 0.05
        sizes = [tset.n_users * f, tset.n_items * f]

        def unpack(vec):
            return (vec[:sizes[0]].reshape(tset.n_users, f),
                    vec[sizes[0]:].reshape(tset.n_items, f))

        theta = rng.normal(0, 0.5, size=sum(sizes))

        def loss_fn(vec):
            P, Q = unpack(vec)
            return bpr_loss(P, Q, us, pos, neg, reg)

        P, Q = unpack(theta)
        gP, gQ = bpr_gradient(P, Q, us, pos, neg, reg)
        grad = np.concatenate([gP.ravel(), gQ.ravel()])
        _check_gradient(loss_fn, grad, theta, rng)

    def test_bpr_negative_sampling_avoids_positives(self):
        tset = _tiny_train(seed=3).binarized()
        rng = np.random.default_rng(9)
        us, pos, neg = sample_triples(tset, 200, rng)
        positive = {(int(u), int(i)) for u, i in zip(tset.users, tset.items)}
        for u, i, j in zip(us, pos, neg):
            assert (int(u), int(i)) in positive
            assert (int(u), int(j)) not in positive


# ---------------------------------------------------------------------------
# ALS: brute-force objectives, monotonicity, stationarity


def _brute_wrmf(train, X, Y, alpha, reg):
    S = np.zeros((train.n_users, train.n_items))
    S[train.users, train.items] = 1.0
    C = 1.0 + alpha * S
    R = X @ Y.T
    return float((C * (S - R) ** 2).sum() + reg * ((X ** 2).sum() + (Y ** 2).sum()))


def _brute_rankals(train, P, Q):
    S = np.zeros((train.n_users, train.n_items))
    S[train.users, train.items] = 1.0
    E = P @ Q.T - S
    total = 0.0
    for u in range(train.n_users):
        for i in range(train.n_items):
            if not S[u, i]:
                continue
            for j in range(train.n_items):
                total += (E[u, i] - E[u, j]) ** 2
    return float(total)


class TestWRMF:
    def test_objective_matches_bruteforce(self):
        tset = _tiny_train(seed=5).binarized()
        rng = np.random.default_rng(5)
        X = rng.normal(0, 0.3, (tset.n_users, 3))
        Y = rng.normal(0, 0.3, (tset.n_items, 3))
        fast = wrmf_objective(tset, X, Y, alpha=7.0, reg=0.1)
        brute = _brute_wrmf(tset, X, Y, alpha=7.0, reg=0.1)
        assert fast == pytest.approx(brute, rel=1e-10)

    def test_objective_monotone_per_sweep(self):
        tset = _tiny_train(seed=6, n_users=6, n_items=7, per_user=4)
        hyper = HyperParams(f=3, alpha_confidence=10.0, reg=0.05, epochs=8)
        model = train(Algorithm.WRMF, tset, hyper, seed=3)
        trace = model.objective_trace
        assert len(trace) == 9
        for prev, cur in zip(trace, trace[1:]):
            assert cur <= prev + 1e-8 * max(1.0, abs(prev))


class TestRankALS:
    def test_objective_matches_bruteforce(self):
        tset = _tiny_train(seed=7).binarized()
        rng = np.random.default_rng(8)
        P = rng.normal(0, 0.3, (tset.n_users, 3))
        Q = rng.normal(0, 0.3, (tset.n_items, 3))
        fast = rankals_objective(tset, P, Q)
        brute = _brute_rankals(tset, P, Q)
        assert fast == pytest.approx(brute, rel=1e-10)

    def test_objective_monotone_per_sweep(self):
        tset = _tiny_train(seed=8, n_users=6, n_items=7, per_user=4)
        hyper = HyperParams(f=3, epochs=8)
        model = train(Algorithm.RANK_ALS, tset, hyper, seed=4)
        trace = model.objective_trace
        assert len(trace) == 9
        for prev, cur in zip(trace, trace[1:]):
            assert cur <= prev + 1e-8 * max(1.0, abs(prev))

    def test_block_stationarity_after_fit(self):
        # after the last sweep: every p_u solved against the then-current Q,
        # but only the LAST item's q_k is guaranteed stationary (Gauss-Seidel)
        tset = _tiny_train(seed=9, n_users=5, n_items=6, per_user=3)
        hyper = HyperParams(f=2, epochs=3)
        model = train(Algorithm.RANK_ALS, tset, hyper, seed=5)
        tset_b = tset.binarized()
        P, Q = model.P.copy(), model.Q.copy()
        h = 1e-5

        k = tset.n_items - 1
        for l in range(Q.shape[1]):
            up, dn = Q.copy(), Q.copy()
            up[k, l] += h
            dn[k, l] -= h
            g = (_brute_rankals(tset_b, P, up) - _brute_rankals(tset_b, P, dn)) / (2 * h)
            assert abs(g) < 1e-5 * max(1.0, _brute_rankals(tset_b, P, Q))

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_monotone_on_larger_random_instances(self, seed):
        rng = np.random.default_rng(seed)
        n_users, n_items = 20, 15
        rows = []
        for u in range(n_users):
            for i in rng.choice(n_items, size=int(rng.integers(3, 10)), replace=False):
                rows.append((u, int(i), 1))
        tset = TrainSet.from_arrays(n_users, n_items, [r[0] for r in rows],
                                    [r[1] for r in rows],
                                    [float(r[2]) for r in rows])
        for alg, hyper in ((Algorithm.RANK_ALS, HyperParams(f=4, epochs=10)),
                           (Algorithm.WRMF, HyperParams(f=4, alpha_confidence=20.0,
                                                        reg=0.02, epochs=10))):
            model = train(alg, tset, hyper, seed=seed)
            trace = model.objective_trace
            for prev, cur in zip(trace, trace[1:]):
                assert cur <= prev + 1e-8 * max(1.0, abs(prev)), (alg, seed)
            # and the solver actually makes progress
            assert trace[-1] < trace[0]

    def test_user_solve_is_exact_minimizer(self):
        # one user pass against fixed Q: every p_u must be stationary
        from biasaudit.recommend.als import RankALSModel

        tset = _tiny_train(seed=10, n_users=5, n_items=6, per_user=3).binarized()
        rng = np.random.default_rng(11)
        model = RankALSModel(HyperParams(f=2, epochs=1), tset, seed=0)
        model.P = rng.normal(0, 0.3, (tset.n_users, 2))
        model.Q = rng.normal(0, 0.3, (tset.n_items, 2))
        n_u = tset.user_counts().astype(np.float64)
        model._user_pass(tset, n_u)
        h = 1e-5
        scale = max(1.0, _brute_rankals(tset, model.P, model.Q))
        for u in range(tset.n_users):
            for l in range(2):
                up, dn = model.P.copy(), model.P.copy()
                up[u, l] += h
                dn[u, l] -= h
                g = (_brute_rankals(tset, up, model.Q)
                     - _brute_rankals(tset, dn, model.Q)) / (2 * h)
                assert abs(g) < 1e-5 * scale, f"user {u} coord {l} gradient {g}"
