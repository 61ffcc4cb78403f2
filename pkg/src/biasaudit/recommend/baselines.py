"""Most-popular and random-guess baselines."""

from __future__ import annotations

import numpy as np

from .base import RecModel
from .params import Algorithm


class MostPopularModel(RecModel):
    algorithm = Algorithm.MOST_POPULAR

    def fit(self, train):
        self.popularity = train.item_counts().astype(np.float64)
        return self

    def scores(self, user):
        return self.popularity


class RandomModel(RecModel):
    """Random guess: a seeded shuffle keyed on (train seed, user), so repeated
    calls for the same user return the same order."""

    algorithm = Algorithm.RANDOM

    def fit(self, train):
        return self

    def scores(self, user):
        rng = np.random.default_rng([self.train_seed, int(user)])
        return rng.permutation(self.n_items).astype(np.float64)
