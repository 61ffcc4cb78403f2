"""Bias, calibration, accuracy, and significance metrics.

The core quantities, for a binary selection matrix M (input S or
recommendation output R), a user group G, and an item category C with
fractional item weights w_i(C):

* preference ratio   PR_M(G, C) = sum_{u in G, i} M(u,i) w_i(C)
                                  / sum_{u in G, i} M(u,i)
* category prior     P(C) = |C| / m, |C| the weighted item count
* bias               B_M(G, C) = PR_M(G, C) / P(C)
* bias disparity     BD(G, C) = (out - in) / in, computed on biases or
                     preference ratios interchangeably (P(C) cancels)

Positive disparity means the algorithm amplified the group's preference for
the category; -1 means the category vanished from the output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats

from .errors import BiasAuditError, UndefinedPreferenceError

DEFAULT_CALIBRATION_ALPHA = 0.01
MANN_WHITNEY = "mann-whitney-u-two-sided-asymptotic"


def preference_ratio(M, users, category, weights):
    """Fraction of the group's selections falling (fractionally) in category.

    ``users`` is an iterable of user indices, or None for the whole
    population.
    """
    wvec = weights.weight_vector(category, M.n_items)
    if users is None:
        users = range(M.n_users)
    num = 0.0
    den = 0
    for u in users:
        row = M.items_of(u)
        den += len(row)
        num += wvec[row].sum()
    if den == 0:
        raise UndefinedPreferenceError("group has no selections; preference ratio undefined")
    return float(num / den)


def category_prior(stats, category):
    """P(C) = weighted item count / number of items."""
    if stats.n_items <= 0:
        raise BiasAuditError("category prior undefined for an empty item universe")
    return float(stats.category_sizes[category] / stats.n_items)


def bias(pr, p_c):
    if not p_c > 0:
        raise BiasAuditError(f"category prior must be positive, got {p_c}")
    return float(pr / p_c)


def bias_disparity(input_value, output_value):
    """Relative change from input to output; input must be positive."""
    if not input_value > 0:
        raise UndefinedPreferenceError(
            f"bias disparity undefined for non-positive input value {input_value}"
        )
    return float((output_value - input_value) / input_value)


def kl_calibration(p, q, alpha=DEFAULT_CALIBRATION_ALPHA):
    """Smoothed KL divergence between a profile distribution p and a
    recommendation distribution q over categories.

    q is smoothed as ``(1-alpha)*q + alpha*p`` so the divergence stays finite
    when the recommendations miss a category entirely; terms with p=0
    contribute nothing.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise BiasAuditError("p and q must have the same shape")
    if not (0.0 < alpha < 1.0):
        raise BiasAuditError(f"alpha must lie in (0, 1), got {alpha}")
    for name, dist in (("p", p), ("q", q)):
        if (dist < 0).any() or abs(dist.sum() - 1.0) > 1e-9:
            raise BiasAuditError(f"{name} is not a distribution (sum {dist.sum()!r})")
    q_tilde = (1.0 - alpha) * q + alpha * p
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q_tilde[mask])))


def ndcg_at_k(ranked, test_items, k):
    """Binary-relevance nDCG of the first k ranked items against a test set."""
    if k < 1:
        raise BiasAuditError(f"k must be >= 1, got {k}")
    test_items = set(int(i) for i in test_items)
    if not test_items:
        raise UndefinedPreferenceError("empty test set; nDCG undefined for this user")
    dcg = 0.0
    for pos, item in enumerate(ranked[:k], start=1):
        if int(item) in test_items:
            dcg += 1.0 / math.log2(pos + 1)
    ideal = sum(1.0 / math.log2(pos + 1) for pos in range(1, min(k, len(test_items)) + 1))
    return dcg / ideal


@dataclass(frozen=True)
class SignificanceResult:
    group_a_stat: float
    group_b_stat: float
    p_value: float
    test_name: str
    n_a: int
    n_b: int


def group_significance(per_user_bd_a, per_user_bd_b, group_a_stat=float("nan"),
                       group_b_stat=float("nan")):
    """Two-sided Mann-Whitney U test on per-user |BD| samples of two groups.

    The headline group statistics (sum of |BD| over categories at the group
    level) are carried through for reporting; the p-value comes from the
    per-user samples.  The asymptotic normal approximation with tie
    correction is used, which suits the cohort sizes this toolkit targets.
    """
    a = np.asarray(per_user_bd_a, dtype=np.float64)
    b = np.asarray(per_user_bd_b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise BiasAuditError("both groups need at least one valid per-user sample")
    res = _scipy_stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic")
    return SignificanceResult(
        group_a_stat=float(group_a_stat),
        group_b_stat=float(group_b_stat),
        p_value=float(res.pvalue),
        test_name=MANN_WHITNEY,
        n_a=len(a),
        n_b=len(b),
    )


# ---------------------------------------------------------------------------
# Aggregates used by the experiment runner


def per_user_category_share(M, weights, categories):
    """(n_users, n_categories) matrix of per-user selection shares; rows of
    users with no selections are all zero."""
    wmat = np.stack([weights.weight_vector(c, M.n_items) for c in categories], axis=1)
    out = np.zeros((M.n_users, len(categories)), dtype=np.float64)
    for u in range(M.n_users):
        row = M.items_of(u)
        if len(row):
            out[u] = wmat[row].sum(axis=0) / len(row)
    return out


@dataclass(frozen=True)
class PreferenceReport:
    """PR/bias/BD for one (algorithm, fold) cell over groups and categories.

    Keys of the per-cell dicts are (group_label, category); the whole
    population appears under group label "ALL".
    """

    categories: tuple
    priors: dict
    pr_input: dict
    pr_output: dict
    bias_input: dict
    bias_output: dict
    disparity: dict


def compute_preference_report(S, R, group_members, weights, categories, priors):
    """Build the full PR/bias/BD table for one recommendation matrix.

    ``group_members`` maps group label -> user index array (label "ALL" for
    the whole population may map to None).
    """
    pr_in, pr_out, b_in, b_out, bd = {}, {}, {}, {}, {}
    for label, members in group_members.items():
        for c in categories:
            key = (label, c)
            pr_s = preference_ratio(S, members, c, weights)
            pr_r = preference_ratio(R, members, c, weights)
            pr_in[key] = pr_s
            pr_out[key] = pr_r
            b_in[key] = bias(pr_s, priors[c])
            b_out[key] = bias(pr_r, priors[c])
            bd[key] = bias_disparity(pr_s, pr_r) if pr_s > 0 else float("nan")
    return PreferenceReport(
        categories=tuple(categories),
        priors=dict(priors),
        pr_input=pr_in,
        pr_output=pr_out,
        bias_input=b_in,
        bias_output=b_out,
        disparity=bd,
    )
