"""Deterministic per-user ("userfixed") k-fold cross-validation splitting."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SplitError


@dataclass(frozen=True)
class FoldSplit:
    """Per-user train/test partition for each of k folds.

    ``folds[f][u]`` is a pair of sorted interaction-id arrays (train, test);
    the k test sets of a user partition that user's interactions.
    """

    folds: list
    k: int
    seed: int


def userfixed_kfold(cohort, k, seed):
    """Shuffle each user's interactions with a generator keyed on (seed, user),
    then deal them round-robin into k test buckets.

    Keying the generator per user makes fold membership independent of user
    iteration order; extras (counts not divisible by k) land on the lowest
    fold indices.
    """
    if k < 2:
        raise SplitError(f"k must be >= 2, got {k}")
    ds = cohort.dataset
    folds = [dict() for _ in range(k)]
    # interactions are stored sorted by (user, item)
    bounds = np.searchsorted(ds.users, np.arange(ds.n_users + 1))
    for u in range(ds.n_users):
        ids = np.arange(bounds[u], bounds[u + 1])
        if len(ids) < k:
            raise SplitError(
                f"user {ds.user_ids[u]!r} has {len(ids)} interactions, fewer than k={k}"
            )
        rng = np.random.default_rng([seed, u])
        perm = rng.permutation(ids)
        for f in range(k):
            test = np.sort(perm[f::k])
            mask = np.ones(len(ids), dtype=bool)
            mask[np.searchsorted(ids, test)] = False
            folds[f][u] = (ids[mask], test)
    return FoldSplit(folds=folds, k=k, seed=int(seed))


def export_split_manifest(split, cohort, path):
    """CSV manifest (`fold,user,item,role`) with external ids, diffable
    against other implementations."""
    ds = cohort.dataset
    lines = ["fold,user,item,role"]
    for f, per_user in enumerate(split.folds):
        for u in sorted(per_user):
            train, test = per_user[u]
            ext_u = ds.user_ids[u]
            for ids, role in ((train, "train"), (test, "test")):
                for iid in ids:
                    lines.append(f"{f},{ext_u},{ds.item_ids[ds.items[iid]]},{role}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)
