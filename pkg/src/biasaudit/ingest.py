"""Dataset ingestion: raw-file parsing, category weights, and selection matrices.

The canonical in-memory form is :class:`InteractionDataset`: densely indexed
users and items (external ids sorted ascending, 0-based indices), interactions
stored in (user, item) order, fractional per-item category weights, and a
group label per user.  Everything downstream (cohorts, splits, models,
metrics) works on these dense indices, which makes every artifact
deterministic for a given set of input files.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateRatingError,
    EmptyCohortError,
    IngestError,
    MalformedLineError,
    UnknownItemError,
)

_logger = logging.getLogger(__name__)

MOVIELENS_RATING_SCALE = (1.0, 5.0)
YELP_RATING_SCALE = (1.0, 5.0)

WEIGHT_TOL = 1e-9

CACHE_FORMAT = "biasaudit-cache"
CACHE_VERSION = 1


@dataclass(frozen=True)
class CategoryWeighting:
    """Fractional category membership per item.

    ``weights[item][label]`` is the weight of ``item`` on ``label``.  For any
    item that carries at least one category, the weights are strictly positive
    and sum to 1 (within ``WEIGHT_TOL``).
    """

    weights: dict

    def labels(self):
        out = set()
        for per_item in self.weights.values():
            out.update(per_item)
        return sorted(out)

    def weight(self, item, label):
        return self.weights.get(item, {}).get(label, 0.0)

    def weight_vector(self, label, n_items):
        """Dense weight column for one label, indexed by item."""
        vec = np.zeros(n_items, dtype=np.float64)
        for item, per_item in self.weights.items():
            w = per_item.get(label)
            if w is not None:
                vec[item] = w
        return vec

    def validate(self):
        for item, per_item in self.weights.items():
            if not per_item:
                continue
            total = 0.0
            for label, w in per_item.items():
                if not w > 0.0:
                    raise IngestError(f"item {item}: non-positive weight for {label!r}")
                total += w
            if abs(total - 1.0) > WEIGHT_TOL:
                raise IngestError(f"item {item}: weights sum to {total!r}, expected 1")


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint group label per user index; labels cover every user."""

    groups: dict

    def labels(self):
        return sorted(set(self.groups.values()))

    def group_of(self, user):
        return self.groups[user]

    def members(self, label):
        out = [u for u, g in self.groups.items() if g == label]
        return np.array(sorted(out), dtype=np.int64)

    def sizes(self):
        out = {}
        for g in self.groups.values():
            out[g] = out.get(g, 0) + 1
        return dict(sorted(out.items()))


def _equal_weights(labels):
    labels = sorted(set(labels))
    if not labels:
        return {}
    w = 1.0 / len(labels)
    return {g: w for g in labels}


@dataclass(frozen=True)
class InteractionDataset:
    """Densely indexed interaction data with item categories and user groups.

    ``user_ids[k]`` / ``item_ids[k]`` give the external id of internal index
    ``k``; external ids are assigned indices in ascending order.  The parallel
    arrays ``users/items/ratings/timestamps`` are sorted by (user, item) and
    contain at most one entry per pair.
    """

    user_ids: tuple
    item_ids: tuple
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    timestamps: np.ndarray
    item_categories: CategoryWeighting
    user_groups: GroupPartition
    rating_scale: tuple

    @property
    def n_users(self):
        return len(self.user_ids)

    @property
    def n_items(self):
        return len(self.item_ids)

    @property
    def n_interactions(self):
        return len(self.users)

    def user_index(self):
        return {ext: k for k, ext in enumerate(self.user_ids)}

    def item_index(self):
        return {ext: k for k, ext in enumerate(self.item_ids)}

    @staticmethod
    def build(user_ids, item_ids, users, items, ratings, timestamps,
              item_categories, user_groups, rating_scale):
        """Sort interactions canonically, check invariants, and construct."""
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        ratings = np.asarray(ratings, dtype=np.float64)
        timestamps = np.asarray(timestamps, dtype=np.int64)
        order = np.lexsort((items, users))
        users, items = users[order], items[order]
        ratings, timestamps = ratings[order], timestamps[order]

        n_users, n_items = len(user_ids), len(item_ids)
        if len(users) and (users.min() < 0 or users.max() >= n_users):
            raise IngestError("interaction references unknown user index")
        if len(items) and (items.min() < 0 or items.max() >= n_items):
            raise IngestError("interaction references unknown item index")
        if len(users) > 1:
            same = (users[1:] == users[:-1]) & (items[1:] == items[:-1])
            if same.any():
                k = int(np.flatnonzero(same)[0])
                raise DuplicateRatingError(
                    f"duplicate rating for user {user_ids[users[k]]!r} "
                    f"on item {item_ids[items[k]]!r}"
                )
        lo, hi = rating_scale
        if len(ratings) and (ratings.min() < lo or ratings.max() > hi):
            raise IngestError(f"rating outside declared scale [{lo}, {hi}]")
        if set(user_groups.groups) != set(range(n_users)):
            raise IngestError("group partition does not cover every user exactly once")
        item_categories.validate()

        ds = InteractionDataset(
            user_ids=tuple(user_ids),
            item_ids=tuple(item_ids),
            users=users,
            items=items,
            ratings=ratings,
            timestamps=timestamps,
            item_categories=item_categories,
            user_groups=user_groups,
            rating_scale=(float(lo), float(hi)),
        )
        return ds


@dataclass(frozen=True)
class BinaryMatrix:
    """Sparse set of (user, item) selections in CSR layout, rows sorted."""

    n_users: int
    n_items: int
    indptr: np.ndarray
    indices: np.ndarray

    @staticmethod
    def from_pairs(n_users, n_items, users, items):
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        order = np.lexsort((items, users))
        users, items = users[order], items[order]
        counts = np.bincount(users, minlength=n_users)
        indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        return BinaryMatrix(n_users, n_items, indptr, items.copy())

    @property
    def nnz(self):
        return int(self.indptr[-1])

    def items_of(self, user):
        return self.indices[self.indptr[user]:self.indptr[user + 1]]

    def row_counts(self):
        return np.diff(self.indptr)

    def toarray(self):
        out = np.zeros((self.n_users, self.n_items), dtype=np.int8)
        for u in range(self.n_users):
            out[u, self.items_of(u)] = 1
        return out


def binarize(dataset, like_threshold=None):
    """Selection matrix S: (u, i) present iff rated (and >= threshold, if set)."""
    if like_threshold is not None:
        lo, hi = dataset.rating_scale
        if not (lo <= like_threshold <= hi):
            raise IngestError(
                f"like_threshold {like_threshold} outside rating scale [{lo}, {hi}]"
            )
        mask = dataset.ratings >= like_threshold
        users, items = dataset.users[mask], dataset.items[mask]
    else:
        users, items = dataset.users, dataset.items
    return BinaryMatrix.from_pairs(dataset.n_users, dataset.n_items, users, items)


# ---------------------------------------------------------------------------
# MovieLens 1M


def _split_dat_line(path, line_no, line, n_fields):
    parts = line.split("::")
    if len(parts) != n_fields:
        raise MalformedLineError(path, line_no, f"expected {n_fields} '::' fields, got {len(parts)}")
    return parts


def load_movielens(ratings_path, movies_path, users_path):
    """Parse the MovieLens 1M triplet of ``::``-delimited files.

    Movies keep equal fractional weights over their pipe-separated genres;
    user groups come from the gender column of users.dat.  Only movies with
    at least one rating are indexed (the raw metadata file lists more movies
    than ever get rated).
    """
    ratings_path, movies_path, users_path = Path(ratings_path), Path(movies_path), Path(users_path)

    movie_genres = {}
    with open(movies_path, encoding="latin-1") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            mid_s, _title, genres_s = _split_dat_line(movies_path, line_no, line, 3)
            try:
                mid = int(mid_s)
            except ValueError:
                raise MalformedLineError(movies_path, line_no, f"bad movie id {mid_s!r}") from None
            genres = [g for g in genres_s.split("|") if g]
            movie_genres[mid] = genres

    user_gender = {}
    with open(users_path, encoding="latin-1") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            uid_s, gender, _age, _occ, _zip = _split_dat_line(users_path, line_no, line, 5)
            try:
                uid = int(uid_s)
            except ValueError:
                raise MalformedLineError(users_path, line_no, f"bad user id {uid_s!r}") from None
            user_gender[uid] = gender

    uids, mids, rates, stamps = [], [], [], []
    lo, hi = MOVIELENS_RATING_SCALE
    with open(ratings_path, encoding="latin-1") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = _split_dat_line(ratings_path, line_no, line, 4)
            try:
                uid, mid, rating, stamp = (int(p) for p in parts)
            except ValueError:
                raise MalformedLineError(ratings_path, line_no, "non-integer field") from None
            if not (lo <= rating <= hi):
                raise MalformedLineError(ratings_path, line_no, f"rating {rating} outside 1-5")
            if mid not in movie_genres:
                raise UnknownItemError(
                    f"{ratings_path}:{line_no}: rating references unknown movie id {mid}"
                )
            if uid not in user_gender:
                raise IngestError(
                    f"{ratings_path}:{line_no}: rating references user {uid} absent from users.dat"
                )
            uids.append(uid)
            mids.append(mid)
            rates.append(float(rating))
            stamps.append(stamp)

    if not uids:
        raise EmptyCohortError(f"{ratings_path}: no ratings found")

    uid_arr = np.array(uids, dtype=np.int64)
    mid_arr = np.array(mids, dtype=np.int64)

    user_ids = np.unique(uid_arr)
    item_ids = np.unique(mid_arr)
    users = np.searchsorted(user_ids, uid_arr)
    items = np.searchsorted(item_ids, mid_arr)

    weights = {
        k: _equal_weights(movie_genres[int(mid)]) for k, mid in enumerate(item_ids)
    }
    groups = {k: user_gender[int(uid)] for k, uid in enumerate(user_ids)}

    ds = InteractionDataset.build(
        user_ids=[int(x) for x in user_ids],
        item_ids=[int(x) for x in item_ids],
        users=users,
        items=items,
        ratings=rates,
        timestamps=stamps,
        item_categories=CategoryWeighting(weights),
        user_groups=GroupPartition(groups),
        rating_scale=MOVIELENS_RATING_SCALE,
    )
    _logger.info(
        "movielens: %d users, %d rated movies, %d ratings",
        ds.n_users, ds.n_items, ds.n_interactions,
    )
    return ds


# ---------------------------------------------------------------------------
# Yelp Open Dataset


def default_region_labels():
    """Allow-list of cuisine/region category labels shipped with the package."""
    path = Path(__file__).parent / "resources" / "yelp_region_labels.txt"
    labels = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            labels.append(line)
    return labels


def _iter_ndjson(path, strict):
    """Yield parsed records; count malformed lines, raise at end under strict."""
    bad = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                bad += 1
                _logger.warning("%s:%d: malformed JSON line skipped", path, line_no)
    if bad:
        _logger.warning("%s: skipped %d malformed JSON lines", path, bad)
        if strict:
            raise IngestError(f"{path}: {bad} malformed JSON lines (strict mode)")


def _parse_yelp_date(text):
    dt = datetime.strptime(text, "%Y-%m-%d %H:%M:%S")
    return int(dt.replace(tzinfo=timezone.utc).timestamp())


def load_yelp_restaurants(business_path, review_path, photo_path, city,
                          min_label_count=50, min_user_ratings=50,
                          region_labels=None, strict=False):
    """Build a restaurant rating dataset from the Yelp Open Dataset files.

    A business counts as a restaurant when its attributes contain
    "RestaurantsTakeOut", any photo record labels it "food", or its categories
    contain "Restaurants".  Restaurants are filtered to ``city``; category
    labels survive when they are on the region allow-list and carried by at
    least ``min_label_count`` such restaurants; users survive with at least
    ``min_user_ratings`` reviews of surviving restaurants (duplicate reviews
    of one business collapse to the most recent).
    """
    if region_labels is None:
        region_labels = default_region_labels()
    region_set = set(region_labels)

    food_photo_biz = set()
    for rec in _iter_ndjson(photo_path, strict):
        if rec.get("label") == "food" and rec.get("business_id"):
            food_photo_biz.add(rec["business_id"])

    biz_city = {}
    biz_labels = {}
    restaurant = set()
    for rec in _iter_ndjson(business_path, strict):
        bid = rec.get("business_id")
        if not bid:
            continue
        cats_s = rec.get("categories") or ""
        cats = [c.strip() for c in cats_s.split(",") if c.strip()]
        attrs = rec.get("attributes") or {}
        if (
            "RestaurantsTakeOut" in attrs
            or bid in food_photo_biz
            or "Restaurants" in cats
        ):
            restaurant.add(bid)
        biz_city[bid] = rec.get("city", "")
        biz_labels[bid] = cats

    in_city = {b for b in restaurant if biz_city.get(b) == city}

    label_counts = {}
    for bid in in_city:
        for label in set(biz_labels[bid]) & region_set:
            label_counts[label] = label_counts.get(label, 0) + 1
    kept_labels = {lbl for lbl, c in label_counts.items() if c >= min_label_count}

    kept_biz = {}
    for bid in in_city:
        labels = sorted(set(biz_labels[bid]) & kept_labels)
        if labels:
            kept_biz[bid] = labels
    if not kept_biz:
        raise EmptyCohortError(
            f"yelp: no restaurants in {city!r} carry a kept region label "
            f"(labels surviving min_label_count={min_label_count}: {len(kept_labels)})"
        )

    # (user, business) -> (timestamp, stars); keep the most recent review
    latest = {}
    for rec in _iter_ndjson(review_path, strict):
        bid = rec.get("business_id")
        if bid not in kept_biz:
            continue
        uid = rec.get("user_id")
        stars = rec.get("stars")
        date_s = rec.get("date")
        if not uid or stars is None or not date_s:
            continue
        ts = _parse_yelp_date(date_s)
        key = (uid, bid)
        if key not in latest or ts >= latest[key][0]:
            latest[key] = (ts, float(stars))

    per_user = {}
    for (uid, _bid) in latest:
        per_user[uid] = per_user.get(uid, 0) + 1
    kept_users = {u for u, c in per_user.items() if c >= min_user_ratings}
    if not kept_users:
        raise EmptyCohortError(
            f"yelp: no user kept >= {min_user_ratings} deduplicated ratings; empty cohort"
        )

    rows = [
        (uid, bid, stars, ts)
        for (uid, bid), (ts, stars) in latest.items()
        if uid in kept_users
    ]
    user_ids = sorted({r[0] for r in rows})
    item_ids = sorted({r[1] for r in rows})
    uindex = {u: k for k, u in enumerate(user_ids)}
    iindex = {b: k for k, b in enumerate(item_ids)}

    weights = {iindex[b]: _equal_weights(kept_biz[b]) for b in item_ids}
    groups = {k: "ALL" for k in range(len(user_ids))}

    ds = InteractionDataset.build(
        user_ids=user_ids,
        item_ids=item_ids,
        users=[uindex[r[0]] for r in rows],
        items=[iindex[r[1]] for r in rows],
        ratings=[r[2] for r in rows],
        timestamps=[r[3] for r in rows],
        item_categories=CategoryWeighting(weights),
        user_groups=GroupPartition(groups),
        rating_scale=YELP_RATING_SCALE,
    )
    _logger.info(
        "yelp %s: %d labels, %d restaurants with kept labels, %d users, %d ratings",
        city, len(kept_labels), len(kept_biz), ds.n_users, ds.n_interactions,
    )
    return ds


# ---------------------------------------------------------------------------
# Internal cache (columnar CSV + manifest)


def _id_to_str(v):
    return str(v)


def _ids_from_str(values, id_type):
    if id_type == "int":
        return [int(v) for v in values]
    return list(values)


def _cache_payload(dataset):
    """Canonical text serialization used by both the cache and fingerprints.

    Labels and external ids must not contain the ',' and '|' delimiters; the
    loaders' source formats already guarantee that, and this re-checks it so
    a bad label fails loudly instead of corrupting the cache.
    """
    for per_item in dataset.item_categories.weights.values():
        for label in per_item:
            if "," in label or "|" in label:
                raise IngestError(f"category label {label!r} contains a cache delimiter")
    for group in set(dataset.user_groups.groups.values()):
        if "," in group or "|" in group:
            raise IngestError(f"group label {group!r} contains a cache delimiter")
    id_type_user = "int" if all(isinstance(u, int) for u in dataset.user_ids) else "str"
    id_type_item = "int" if all(isinstance(i, int) for i in dataset.item_ids) else "str"
    manifest = {
        "format": CACHE_FORMAT,
        "version": CACHE_VERSION,
        "id_type": {"user": id_type_user, "item": id_type_item},
        "rating_scale": list(dataset.rating_scale),
        "n_users": dataset.n_users,
        "n_items": dataset.n_items,
        "n_interactions": dataset.n_interactions,
        "files": ["users.csv", "items.csv", "interactions.csv"],
    }

    users_lines = ["user_id,group"]
    for k, ext in enumerate(dataset.user_ids):
        users_lines.append(f"{_id_to_str(ext)},{dataset.user_groups.group_of(k)}")

    items_lines = ["item_id,categories,weights"]
    for k, ext in enumerate(dataset.item_ids):
        per_item = dataset.item_categories.weights.get(k, {})
        labels = sorted(per_item)
        cats = "|".join(labels)
        ws = "|".join(repr(per_item[g]) for g in labels)
        items_lines.append(f"{_id_to_str(ext)},{cats},{ws}")

    inter_lines = ["user_id,item_id,rating,timestamp"]
    for u, i, r, t in zip(dataset.users, dataset.items, dataset.ratings, dataset.timestamps):
        inter_lines.append(
            f"{_id_to_str(dataset.user_ids[u])},{_id_to_str(dataset.item_ids[i])},{repr(float(r))},{int(t)}"
        )

    return {
        "manifest.json": json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        "users.csv": "\n".join(users_lines) + "\n",
        "items.csv": "\n".join(items_lines) + "\n",
        "interactions.csv": "\n".join(inter_lines) + "\n",
    }


def save_dataset(dataset, directory):
    """Write the documented columnar cache format (CSV files + manifest)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, text in _cache_payload(dataset).items():
        (directory / name).write_text(text, encoding="utf-8")
    return directory


def load_dataset(directory):
    """Reload a dataset saved by :func:`save_dataset`."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("format") != CACHE_FORMAT:
        raise IngestError(f"{directory}: not a {CACHE_FORMAT} directory")

    def rows_of(name):
        lines = (directory / name).read_text(encoding="utf-8").splitlines()
        return lines[0], lines[1:]

    _, user_rows = rows_of("users.csv")
    raw_user_ids, groups = [], {}
    for k, row in enumerate(user_rows):
        ext, group = row.split(",")
        raw_user_ids.append(ext)
        groups[k] = group
    user_ids = _ids_from_str(raw_user_ids, manifest["id_type"]["user"])

    _, item_rows = rows_of("items.csv")
    raw_item_ids, weights = [], {}
    for k, row in enumerate(item_rows):
        ext, cats, ws = row.split(",")
        raw_item_ids.append(ext)
        if cats:
            labels = cats.split("|")
            values = [float(x) for x in ws.split("|")]
            weights[k] = dict(zip(labels, values))
        else:
            weights[k] = {}
    item_ids = _ids_from_str(raw_item_ids, manifest["id_type"]["item"])

    uindex = {u: k for k, u in enumerate(user_ids)}
    iindex = {i: k for k, i in enumerate(item_ids)}
    _, inter_rows = rows_of("interactions.csv")
    users, items, ratings, stamps = [], [], [], []
    for row in inter_rows:
        ext_u, ext_i, rating, stamp = row.split(",")
        users.append(uindex[_ids_from_str([ext_u], manifest["id_type"]["user"])[0]])
        items.append(iindex[_ids_from_str([ext_i], manifest["id_type"]["item"])[0]])
        ratings.append(float(rating))
        stamps.append(int(stamp))

    return InteractionDataset.build(
        user_ids=user_ids,
        item_ids=item_ids,
        users=users,
        items=items,
        ratings=ratings,
        timestamps=stamps,
        item_categories=CategoryWeighting(weights),
        user_groups=GroupPartition(groups),
        rating_scale=tuple(manifest["rating_scale"]),
    )


def dataset_fingerprint(dataset):
    """sha256 over the canonical cache serialization."""
    h = hashlib.sha256()
    for name, text in sorted(_cache_payload(dataset).items()):
        h.update(name.encode())
        h.update(b"\0")
        h.update(text.encode())
    return h.hexdigest()
