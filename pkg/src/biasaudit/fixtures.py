"""Bundled synthetic fixture dataset for demos, smoke tests, and the CLI.

20 users, 12 items, two categories; group "M" leans toward CatA while group
"F" is balanced, echoing the shape of a real genre-pair audit at toy scale.
Generation is fully seeded, so fixture-driven runs are reproducible.
"""

from __future__ import annotations

import numpy as np

from .ingest import CategoryWeighting, GroupPartition, InteractionDataset

DEMO_SEED = 20240311
DEMO_CATEGORIES = ("CatA", "CatB")


def make_demo_dataset(n_users=20, n_items=12, min_per_user=6, max_per_user=10):
    rng = np.random.default_rng(DEMO_SEED)
    half = n_items // 2
    weights = {}
    for i in range(n_items):
        if i % 5 == 4:  # a few items carry both categories
            weights[i] = {DEMO_CATEGORIES[0]: 0.5, DEMO_CATEGORIES[1]: 0.5}
        elif i < half:
            weights[i] = {DEMO_CATEGORIES[0]: 1.0}
        else:
            weights[i] = {DEMO_CATEGORIES[1]: 1.0}

    wa = np.array([weights[i].get(DEMO_CATEGORIES[0], 0.0) for i in range(n_items)])
    groups = {u: ("M" if u % 3 else "F") for u in range(n_users)}

    users, items, ratings, stamps = [], [], [], []
    pure_a = [i for i in range(n_items) if weights[i].get(DEMO_CATEGORIES[0], 0.0) == 1.0]
    for u in range(n_users):
        if u == 0:
            # one guaranteed extreme-preference user: only pure-CatA items
            chosen = np.array(pure_a)
        else:
            n_u = int(rng.integers(min_per_user, max_per_user + 1))
            lean = 0.75 if groups[u] == "M" else 0.5
            pref = lean * wa + (1.0 - lean) * (1.0 - wa) + 0.05
            pref /= pref.sum()
            chosen = rng.choice(n_items, size=n_u, replace=False, p=pref)
        for i in sorted(int(x) for x in chosen):
            base = 3.5 if weights[i].get(DEMO_CATEGORIES[0], 0) >= 0.5 and groups[u] == "M" else 3.0
            r = float(np.clip(round(base + rng.normal(0, 1)), 1, 5))
            users.append(u)
            items.append(i)
            ratings.append(r)
            stamps.append(1_000_000_000 + len(users))

    return InteractionDataset.build(
        user_ids=list(range(1, n_users + 1)),
        item_ids=list(range(101, 101 + n_items)),
        users=users,
        items=items,
        ratings=ratings,
        timestamps=stamps,
        item_categories=CategoryWeighting(weights),
        user_groups=GroupPartition(groups),
        rating_scale=(1.0, 5.0),
    )


def demo_config_dict(output_dir, algorithms=None):
    """A ready-to-run experiment config against the demo dataset."""
    if algorithms is None:
        algorithms = [
            "MostPopular", "Random", "UserKNN", "ItemKNN",
            "BiasedMF", "SVDpp", "WRMF", "BPR", "RankALS",
        ]
    return {
        "name": "demo",
        "dataset": {"kind": "demo"},
        "pair": list(DEMO_CATEGORIES),
        "min_ratings": 5,
        "like_threshold": None,
        "algorithms": [{"algorithm": a, "hyper": {"f": 4, "epochs": 10}} for a in algorithms],
        "folds": 3,
        "top_n": 3,
        "seed": 17,
        "output_dir": str(output_dir),
    }
