"""Algorithm behavior: baselines, KNN vs a brute-force oracle, determinism."""

import numpy as np
import pytest

from biasaudit.cohort import build_experiment_subset
from biasaudit.errors import BiasAuditError, TrainingDivergedError
from biasaudit.fixtures import make_demo_dataset
from biasaudit.recommend import (
    Algorithm,
    HyperParams,
    TrainSet,
    build_R,
    default_hyperparams,
    recommend_top_n,
    train,
)
from biasaudit.split import userfixed_kfold


def _train_set(rows, n_users, n_items):
    return TrainSet.from_arrays(
        n_users, n_items,
        [r[0] for r in rows], [r[1] for r in rows], [float(r[2]) for r in rows],
    )


class TestMostPopular:
    def test_counts(self):
        tset = _train_set([(0, 0, 1), (1, 0, 1), (1, 1, 1)], 2, 3)
        model = train(Algorithm.MOST_POPULAR, tset, seed=0)
        assert list(model.popularity) == [2, 1, 0]

    def test_tie_break_by_index(self):
        tset = _train_set([(0, 0, 1), (1, 0, 1), (0, 1, 1), (1, 2, 1)], 2, 3)
        model = train(Algorithm.MOST_POPULAR, tset, seed=0)
        # popularity {0: 2, 1: 1, 2: 1}; excluding item 0 leaves a tie -> index order
        assert list(recommend_top_n(model, 0, exclude=[0], top_n=2)) == [1, 2]

    def test_subsequence_of_global_popularity(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            n_users, n_items = 6, 9
            rows = []
            for u in range(n_users):
                for i in rng.choice(n_items, size=4, replace=False):
                    rows.append((u, int(i), 1))
            tset = _train_set(rows, n_users, n_items)
            model = train(Algorithm.MOST_POPULAR, tset, seed=0)
            global_order = list(np.lexsort((np.arange(n_items), -model.popularity)))
            for u in range(n_users):
                exclude = set(int(i) for i in tset.items_of(u))
                got = list(recommend_top_n(model, u, sorted(exclude), top_n=3))
                expected = [i for i in global_order if i not in exclude][:3]
                assert got == expected


class TestRandom:
    def test_same_user_same_list(self):
        tset = _train_set([(0, 0, 1), (1, 1, 1)], 2, 8)
        model = train(Algorithm.RANDOM, tset, seed=123)
        a = recommend_top_n(model, 0, exclude=[0], top_n=4)
        b = recommend_top_n(model, 0, exclude=[0], top_n=4)
        assert np.array_equal(a, b)

    def test_seed_matters(self):
        tset = _train_set([(0, 0, 1), (1, 1, 1)], 2, 50)
        m1 = train(Algorithm.RANDOM, tset, seed=1)
        m2 = train(Algorithm.RANDOM, tset, seed=2)
        a = recommend_top_n(m1, 0, exclude=[0], top_n=10)
        b = recommend_top_n(m2, 0, exclude=[0], top_n=10)
        assert not np.array_equal(a, b)


# --------------------------------------------------------------------------
# Brute-force KNN oracle: independent recomputation with plain loops


def _center(vec, mask):
    rated = [v for v, m in zip(vec, mask) if m]
    mean = sum(rated) / len(rated) if rated else 0.0
    return [(v - mean) if m else 0.0 for v, m in zip(vec, mask)]


def _cos(a, b):
    num = sum(x * y for x, y in zip(a, b))
    na = sum(x * x for x in a) ** 0.5
    nb = sum(y * y for y in b) ** 0.5
    if na == 0 or nb == 0:
        return 0.0
    return num / (na * nb)


def _brute_knn_scores(kind, tset, mode, user, k):
    n, m = tset.n_users, tset.n_items
    X = [[0.0] * m for _ in range(n)]
    M = [[False] * m for _ in range(n)]
    for u, i, r in zip(tset.users, tset.items, tset.ratings):
        X[u][i] = r
        M[u][i] = True

    if kind == "user":
        rows = X
        masks = M
    else:
        rows = [list(col) for col in zip(*X)]
        masks = [list(col) for col in zip(*M)]

    if mode == "pearson":
        rows = [_center(v, mk) for v, mk in zip(rows, masks)]

    def sim(a, b):
        return _cos(rows[a], rows[b])

    scores = [0.0] * m
    if kind == "user":
        for i in range(m):
            raters = [v for v in range(n) if M[v][i] and v != user]
            raters.sort(key=lambda v: (-sim(user, v), v))
            scores[i] = sum(sim(user, v) for v in raters[:k])
    else:
        rated = [j for j in range(m) if M[user][j]]
        for i in range(m):
            neigh = sorted(rated, key=lambda j: (-sim(i, j) if i != j else 0, j))
            neigh = [j for j in neigh if j != i]
            vals = sorted((sim(i, j) for j in neigh), reverse=True)
            scores[i] = sum(vals[:k])
    return scores


def _brute_top_n(scores, exclude, top_n):
    m = len(scores)
    order = sorted(range(m), key=lambda i: (-scores[i], i))
    return [i for i in order if i not in set(exclude)][:top_n]


class TestKNN:
    def test_userknn_identical_neighbor_toy(self):
        rows = [(0, 0, 5), (0, 1, 1),
                (1, 0, 5), (1, 1, 1), (1, 2, 4),
                (2, 0, 1), (2, 1, 5), (2, 3, 5)]
        tset = _train_set(rows, 3, 4)
        model = train(Algorithm.USER_KNN, tset, seed=0)
        got = recommend_top_n(model, 0, exclude=[0, 1], top_n=2)
        # the near-identical neighbor (user 1) rated item 2; the dissimilar
        # user rated item 3
        assert list(got) == [2, 3]
        brute = _brute_top_n(_brute_knn_scores("user", tset, "pearson", 0, 50), [0, 1], 2)
        assert list(got) == brute

    @pytest.mark.parametrize("algorithm,kind", [
        (Algorithm.USER_KNN, "user"),
        (Algorithm.ITEM_KNN, "item"),
    ])
    @pytest.mark.parametrize("mode", ["pearson", "cosine"])
    def test_oracle_equivalence_small(self, algorithm, kind, mode):
        rng = np.random.default_rng(17)
        for trial in range(8):
            n_users = int(rng.integers(3, 9))
            n_items = int(rng.integers(3, 9))
            rows = []
            for u in range(n_users):
                size = int(rng.integers(1, n_items + 1))
                for i in rng.choice(n_items, size=size, replace=False):
                    rows.append((u, int(i), int(rng.integers(1, 6))))
            tset = _train_set(rows, n_users, n_items)
            k = int(rng.integers(1, 6))
            hyper = default_hyperparams(algorithm).override(
                k_neighbors=k, similarity=mode, top_n=2)
            model = train(algorithm, tset, hyper, seed=0)
            for u in range(n_users):
                exclude = sorted(int(i) for i in tset.items_of(u))
                if n_items - len(exclude) < 2:
                    continue
                got = list(recommend_top_n(model, u, exclude, top_n=2))
                scores = _brute_knn_scores(kind, tset, mode, u, k)
                assert got == _brute_top_n(scores, exclude, 2), (
                    f"trial {trial} user {u} {algorithm} {mode}"
                )


class TestBiasedMF:
    def test_dense_toy_fits(self):
        rng = np.random.default_rng(0)
        rows = [(u, i, int(rng.integers(1, 6))) for u in range(4) for i in range(4)]
        tset = _train_set(rows, 4, 4)
        hyper = HyperParams(f=4, learn_rate=0.05, reg=0.001, epochs=200)
        model = train(Algorithm.BIASED_MF, tset, hyper, seed=1)
        assert model.training_rmse(tset) < 0.1

    def test_loss_zero_at_zero_init_single_rating(self):
        from biasaudit.recommend.mf_sgd import biasedmf_loss

        tset = _train_set([(0, 0, 4)], 1, 1)
        mu = tset.global_mean()  # equals the single rating
        loss = biasedmf_loss(tset, mu, np.zeros((1, 2)), np.zeros((1, 2)),
                             np.zeros(1), np.zeros(1), reg=0.02)
        assert loss == 0.0

    def test_divergence_reported(self):
        rows = [(u, i, 5) for u in range(3) for i in range(3)]
        tset = _train_set(rows, 3, 3)
        hyper = HyperParams(f=2, learn_rate=1e6, reg=0.001, epochs=50)
        with pytest.raises(TrainingDivergedError) as exc:
            train(Algorithm.BIASED_MF, tset, hyper, seed=1)
        assert exc.value.learn_rate == 1e6


class TestBPRSampling:
    def test_rejects_user_covering_all_items(self):
        from biasaudit.recommend.bpr import sample_triples

        rows = [(0, i, 1) for i in range(3)] + [(1, 0, 1)]
        tset = _train_set(rows, 2, 3).binarized()
        with pytest.raises(BiasAuditError):
            sample_triples(tset, 10, np.random.default_rng(0))


class TestColdUser:
    def test_fallback_to_popularity(self, caplog):
        # user 3 exists but has no training interactions
        tset = _train_set([(0, 0, 5), (1, 0, 4), (1, 1, 3), (2, 1, 2)], 4, 3)
        model = train(Algorithm.BIASED_MF, tset,
                      HyperParams(f=2, epochs=2), seed=0)
        with caplog.at_level("INFO"):
            got = recommend_top_n(model, 3, exclude=[], top_n=3)
        assert list(got) == [0, 1, 2]  # popularity {0: 2, 1: 2, 2: 0}, index ties
        assert any("cold" in rec.message for rec in caplog.records)


class TestBuildR:
    def _cohort_split(self):
        ds = make_demo_dataset()
        cohort = build_experiment_subset(ds, ("CatA", "CatB"), min_ratings=5)
        split = userfixed_kfold(cohort, k=3, seed=9)
        return cohort, split

    def test_shape_and_exclusion(self):
        cohort, split = self._cohort_split()
        ds = cohort.dataset
        tsets = []
        models = []
        for f in range(3):
            ids = np.concatenate([split.folds[f][u][0] for u in range(ds.n_users)])
            tset = TrainSet.from_arrays(ds.n_users, ds.n_items,
                                        ds.users[ids], ds.items[ids], ds.ratings[ids])
            tsets.append(tset)
            models.append(train(Algorithm.MOST_POPULAR, tset, seed=0))
        R_folds = build_R(models, split, cohort, top_n=3)
        assert len(R_folds) == 3
        for f, R in enumerate(R_folds):
            assert R.ranked.shape == (ds.n_users, 3)
            for u in range(ds.n_users):
                row = R.items_of(u)
                assert len(set(int(i) for i in row)) == 3
                train_items = set(int(i) for i in tsets[f].items_of(u))
                assert train_items.isdisjoint(int(i) for i in row)

    def test_two_users_entry_count(self):
        rows = [(0, i, 1) for i in range(12)] + [(1, i, 1) for i in range(3, 15)]
        tset = _train_set(rows, 2, 30)
        model = train(Algorithm.MOST_POPULAR, tset, seed=0)
        total = 0
        for u in range(2):
            total += len(recommend_top_n(model, u, tset.items_of(u), top_n=10))
        assert total == 20

    def test_mostpopular_matches_bruteforce(self):
        # 5 users x 6 items toy, oracle sorts items by count per user
        rows = [(0, 0, 1), (0, 1, 1), (1, 0, 1), (1, 2, 1), (2, 0, 1),
                (2, 3, 1), (3, 1, 1), (3, 4, 1), (4, 2, 1), (4, 5, 1)]
        tset = _train_set(rows, 5, 6)
        model = train(Algorithm.MOST_POPULAR, tset, seed=0)
        counts = [0] * 6
        for _, i, _ in rows:
            counts[i] += 1
        for u in range(5):
            exclude = sorted(int(i) for i in tset.items_of(u))
            got = list(recommend_top_n(model, u, exclude, top_n=2))
            order = sorted(range(6), key=lambda i: (-counts[i], i))
            expected = [i for i in order if i not in set(exclude)][:2]
            assert got == expected

    def test_insufficient_candidates(self):
        tset = _train_set([(0, 0, 1), (0, 1, 1)], 1, 3)
        model = train(Algorithm.MOST_POPULAR, tset, seed=0)
        with pytest.raises(BiasAuditError):
            recommend_top_n(model, 0, exclude=[0, 1], top_n=2)


class TestModelDumps:
    def test_biasedmf_round_trip(self, tmp_path):
        from biasaudit.recommend import dump_model, load_model_dump

        tset = _train_set([(0, 0, 5), (0, 1, 3), (1, 0, 4), (1, 2, 2)], 2, 3)
        model = train(Algorithm.BIASED_MF, tset, HyperParams(f=2, epochs=5), seed=3)
        path = dump_model(model, tmp_path / "biasedmf.dump")
        header, sections = load_model_dump(path)
        assert header["algorithm"] == "BiasedMF"
        assert header["global_mean"] == model.mu
        assert np.allclose(sections["user_factors"], model.P)
        assert np.allclose(sections["item_factors"], model.Q)
        assert np.allclose(sections["user_bias"][:, 0], model.bu)

    def test_knn_dump_lists_neighbors(self, tmp_path):
        from biasaudit.recommend import dump_model, load_model_dump

        tset = _train_set([(0, 0, 5), (0, 1, 3), (1, 0, 4), (1, 2, 2), (2, 1, 1)], 3, 3)
        model = train(Algorithm.USER_KNN, tset,
                      default_hyperparams(Algorithm.USER_KNN).override(k_neighbors=2),
                      seed=0)
        header, sections = load_model_dump(dump_model(model, tmp_path / "knn.dump"))
        assert header["algorithm"] == "UserKNN"
        # one row per (user, neighbor) pair, k=2 neighbors for 3 users
        assert sections["neighbors"].shape == (6, 2)

    def test_export_recommendations_csv(self, tmp_path):
        from biasaudit.recommend import export_recommendations

        ds = make_demo_dataset()
        cohort = build_experiment_subset(ds, ("CatA", "CatB"), min_ratings=5)
        split = userfixed_kfold(cohort, k=3, seed=2)
        dsc = cohort.dataset
        models = []
        for f in range(3):
            ids = np.concatenate([split.folds[f][u][0] for u in range(dsc.n_users)])
            tset = TrainSet.from_arrays(dsc.n_users, dsc.n_items,
                                        dsc.users[ids], dsc.items[ids], dsc.ratings[ids])
            models.append(train(Algorithm.MOST_POPULAR, tset, seed=0))
        R_folds = build_R(models, split, cohort, top_n=3)
        path = export_recommendations(R_folds, cohort, tmp_path / "recs.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "fold,user,rank,item"
        assert len(lines) - 1 == 3 * dsc.n_users * 3
        ranks = {int(l.split(",")[2]) for l in lines[1:]}
        assert ranks == {1, 2, 3}


class TestSeedDeterminism:
    @pytest.mark.parametrize("algorithm", list(Algorithm))
    def test_identical_R(self, algorithm):
        ds = make_demo_dataset()
        cohort = build_experiment_subset(ds, ("CatA", "CatB"), min_ratings=5)
        split = userfixed_kfold(cohort, k=3, seed=4)
        dsc = cohort.dataset
        hyper = default_hyperparams(algorithm).override(f=4, epochs=5, top_n=3)

        def run_once():
            models = []
            for f in range(3):
                ids = np.concatenate([split.folds[f][u][0] for u in range(dsc.n_users)])
                tset = TrainSet.from_arrays(dsc.n_users, dsc.n_items,
                                            dsc.users[ids], dsc.items[ids], dsc.ratings[ids])
                models.append(train(algorithm, tset, hyper, seed=77 + f))
            return build_R(models, split, cohort, top_n=3)

        first = run_once()
        second = run_once()
        for Ra, Rb in zip(first, second):
            assert np.array_equal(Ra.ranked, Rb.ranked)
