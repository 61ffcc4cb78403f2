"""Shared fixtures: toy datasets, synthetic raw files, and the ML-1M locator."""

from __future__ import annotations

import os
from pathlib import Path

import pytest

from biasaudit.ingest import (
    CategoryWeighting,
    GroupPartition,
    InteractionDataset,
    load_movielens,
)

ML1M_ENV = "BIASAUDIT_ML1M"


def ml1m_dir():
    """Directory holding ratings.dat/movies.dat/users.dat, or None."""
    candidates = []
    if os.environ.get(ML1M_ENV):
        candidates.append(Path(os.environ[ML1M_ENV]))
    candidates.append(Path(__file__).resolve().parent.parent / "data" / "ml-1m")
    for cand in candidates:
        if all((cand / f).is_file() for f in ("ratings.dat", "movies.dat", "users.dat")):
            return cand
    return None


@pytest.fixture(scope="session")
def ml1m_dataset():
    path = ml1m_dir()
    if path is None:
        pytest.skip(
            f"MovieLens 1M not available locally; set {ML1M_ENV} or place the files "
            "under data/ml-1m/ (the toolkit never downloads datasets)"
        )
    return load_movielens(path / "ratings.dat", path / "movies.dat", path / "users.dat")


def build_toy_dataset(rows, weights, groups, rating_scale=(1.0, 5.0),
                      user_ids=None, item_ids=None):
    """rows: list of (user_idx, item_idx, rating); weights/groups keyed by index."""
    n_users = len(groups)
    n_items = len(weights)
    return InteractionDataset.build(
        user_ids=user_ids or list(range(1, n_users + 1)),
        item_ids=item_ids or list(range(1, n_items + 1)),
        users=[r[0] for r in rows],
        items=[r[1] for r in rows],
        ratings=[float(r[2]) for r in rows],
        timestamps=[1_000 + k for k in range(len(rows))],
        item_categories=CategoryWeighting(weights),
        user_groups=GroupPartition(groups),
        rating_scale=rating_scale,
    )


def write_movielens_files(tmp_path, ratings_lines, movies_lines, users_lines):
    tmp_path.mkdir(parents=True, exist_ok=True)
    ratings = tmp_path / "ratings.dat"
    movies = tmp_path / "movies.dat"
    users = tmp_path / "users.dat"
    ratings.write_text("\n".join(ratings_lines) + "\n", encoding="latin-1")
    movies.write_text("\n".join(movies_lines) + "\n", encoding="latin-1")
    users.write_text("\n".join(users_lines) + "\n", encoding="latin-1")
    return ratings, movies, users


def random_toy_dataset(rng, n_users=6, n_items=6, categories=("A", "B"), density=0.6):
    """Random two-category dataset where every user has >= 1 interaction."""
    weights = {}
    for i in range(n_items):
        kind = rng.integers(0, 3)
        if kind == 0:
            weights[i] = {categories[0]: 1.0}
        elif kind == 1:
            weights[i] = {categories[1]: 1.0}
        else:
            weights[i] = {categories[0]: 0.5, categories[1]: 0.5}
    rows = []
    for u in range(n_users):
        n_u = max(1, int(rng.binomial(n_items, density)))
        for i in sorted(rng.choice(n_items, size=n_u, replace=False)):
            rows.append((u, int(i), int(rng.integers(1, 6))))
    groups = {u: ("M" if rng.random() < 0.6 else "F") for u in range(n_users)}
    return build_toy_dataset(rows, weights, groups)
