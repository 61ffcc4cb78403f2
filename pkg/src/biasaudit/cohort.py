"""Genre-pair experiment cohorts: subset construction, stats, extreme users."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCohortError, UnknownCategoryError
from .ingest import (
    CategoryWeighting,
    GroupPartition,
    InteractionDataset,
    dataset_fingerprint,
)


@dataclass(frozen=True)
class ExperimentCohort:
    """A dataset restricted to a category pair, with pair-renormalized weights."""

    dataset: InteractionDataset
    category_pair: tuple
    pair_weights: CategoryWeighting
    provenance: dict


@dataclass(frozen=True)
class CohortStats:
    n_users: int
    n_items: int
    n_interactions: int
    group_sizes: dict
    category_sizes: dict
    density: float

    @property
    def sparsity(self):
        return 1.0 - self.density


def build_experiment_subset(dataset, pair, min_ratings):
    """Restrict to items carrying either pair category, then filter users once.

    Items keep fractional weights renormalized over the pair (an item tagged
    with both ends up 0.5/0.5); users need at least ``min_ratings``
    interactions on the surviving items.  One pass: items, then users.
    """
    c1, c2 = pair
    if c1 == c2:
        raise UnknownCategoryError(f"pair labels must be distinct, got {c1!r} twice")
    known = set(dataset.item_categories.labels())
    for c in (c1, c2):
        if c not in known:
            raise UnknownCategoryError(f"unknown category label {c!r}")

    old_weights = dataset.item_categories.weights
    keep_items = []
    pair_w = {}
    for item in range(dataset.n_items):
        per_item = old_weights.get(item, {})
        w1 = per_item.get(c1, 0.0)
        w2 = per_item.get(c2, 0.0)
        total = w1 + w2
        if total > 0.0:
            keep_items.append(item)
            pw = {}
            if w1 > 0.0:
                pw[c1] = w1 / total
            if w2 > 0.0:
                pw[c2] = w2 / total
            pair_w[item] = pw

    if not keep_items:
        raise EmptyCohortError(f"no item carries {c1!r} or {c2!r}")

    keep_items = np.array(keep_items, dtype=np.int64)
    item_mask = np.zeros(dataset.n_items, dtype=bool)
    item_mask[keep_items] = True
    inter_mask = item_mask[dataset.items]

    counts = np.bincount(dataset.users[inter_mask], minlength=dataset.n_users)
    keep_users = np.flatnonzero(counts >= min_ratings)
    if len(keep_users) == 0:
        raise EmptyCohortError(
            f"no user has >= {min_ratings} ratings on the {c1!r}/{c2!r} items"
        )
    user_mask = np.zeros(dataset.n_users, dtype=bool)
    user_mask[keep_users] = True
    inter_mask &= user_mask[dataset.users]

    # old index -> new dense index; ascending old order preserves external-id order
    new_user = {int(old): k for k, old in enumerate(keep_users)}
    new_item = {int(old): k for k, old in enumerate(keep_items)}

    sub = InteractionDataset.build(
        user_ids=[dataset.user_ids[int(u)] for u in keep_users],
        item_ids=[dataset.item_ids[int(i)] for i in keep_items],
        users=[new_user[int(u)] for u in dataset.users[inter_mask]],
        items=[new_item[int(i)] for i in dataset.items[inter_mask]],
        ratings=dataset.ratings[inter_mask],
        timestamps=dataset.timestamps[inter_mask],
        item_categories=CategoryWeighting(
            {new_item[int(i)]: pair_w[int(i)] for i in keep_items}
        ),
        user_groups=GroupPartition(
            {new_user[int(u)]: dataset.user_groups.group_of(int(u)) for u in keep_users}
        ),
        rating_scale=dataset.rating_scale,
    )

    provenance = {
        "source_fingerprint": dataset_fingerprint(dataset),
        "pair": [c1, c2],
        "min_ratings": int(min_ratings),
    }
    return ExperimentCohort(
        dataset=sub,
        category_pair=(c1, c2),
        pair_weights=sub.item_categories,
        provenance=provenance,
    )


def cohort_stats(cohort):
    ds = cohort.dataset
    if ds.n_interactions == 0:
        raise EmptyCohortError("cohort has no interactions")
    category_sizes = {}
    for c in cohort.category_pair:
        category_sizes[c] = float(
            cohort.pair_weights.weight_vector(c, ds.n_items).sum()
        )
    return CohortStats(
        n_users=ds.n_users,
        n_items=ds.n_items,
        n_interactions=ds.n_interactions,
        group_sizes=ds.user_groups.sizes(),
        category_sizes=category_sizes,
        density=ds.n_interactions / (ds.n_users * ds.n_items),
    )


def select_extreme_users(S, cohort, zero_category):
    """Users with input preference ratio exactly 0 on one pair category.

    Selected users have zero weighted selections on ``zero_category`` and a
    positive weighted count on the other category; users with zero on both
    are excluded.
    """
    pair = cohort.category_pair
    if zero_category not in pair:
        raise UnknownCategoryError(f"{zero_category!r} not in cohort pair {pair}")
    other = pair[0] if zero_category == pair[1] else pair[1]

    wz = cohort.pair_weights.weight_vector(zero_category, S.n_items)
    wo = cohort.pair_weights.weight_vector(other, S.n_items)
    selected = []
    for u in range(S.n_users):
        row = S.items_of(u)
        if len(row) == 0:
            continue
        if wz[row].sum() == 0.0 and wo[row].sum() > 0.0:
            selected.append(u)
    return np.array(selected, dtype=np.int64)
