"""Config-driven experiment orchestration and report emission.

``run_experiment`` executes the whole audit pipeline (ingest -> cohort ->
split -> train/recommend per (algorithm, fold) -> metrics -> significance)
deterministically for a given config, and ``emit_report`` writes the CSVs,
JSON summary, and SVG charts.  Nothing is written unless the full pipeline
succeeded.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .charts import grouped_bar_svg
from .cohort import build_experiment_subset, cohort_stats, select_extreme_users
from .errors import BiasAuditError, PipelineError
from .fixtures import make_demo_dataset
from .ingest import binarize, dataset_fingerprint, load_dataset, load_movielens, load_yelp_restaurants
from .metrics import (
    DEFAULT_CALIBRATION_ALPHA,
    category_prior,
    compute_preference_report,
    group_significance,
    kl_calibration,
    ndcg_at_k,
    per_user_category_share,
    preference_ratio,
)
from .recommend import (
    Algorithm,
    HyperParams,
    TrainSet,
    build_R,
    default_hyperparams,
    parse_algorithm,
    train,
)
from .split import userfixed_kfold

_logger = logging.getLogger(__name__)

ALL_GROUP = "ALL"
EXTREME_GROUP = "EXTREME"


@dataclass(frozen=True)
class AlgorithmSpec:
    algorithm: Algorithm
    hyper: HyperParams

    def to_dict(self):
        return {"algorithm": self.algorithm.value, "hyper": vars(self.hyper).copy()}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dataset: dict
    pair: tuple
    min_ratings: int
    algorithms: tuple
    folds: int = 5
    top_n: int = 10
    seed: int = 42
    like_threshold: float = None
    output_dir: str = "out"

    def validate(self):
        if self.folds < 2:
            raise BiasAuditError(f"folds must be >= 2, got {self.folds}")
        if not self.algorithms:
            raise BiasAuditError("config needs at least one algorithm")
        if len(self.pair) != 2 or self.pair[0] == self.pair[1]:
            raise BiasAuditError(f"pair must be two distinct labels, got {self.pair}")
        if self.seed < 0:
            raise BiasAuditError(f"seed must be non-negative, got {self.seed}")
        if self.top_n < 1:
            raise BiasAuditError(f"top_n must be >= 1, got {self.top_n}")
        for spec in self.algorithms:
            spec.hyper.validate()

    @staticmethod
    def from_dict(d):
        algos = []
        for entry in d.get("algorithms", []):
            if isinstance(entry, str):
                entry = {"algorithm": entry}
            alg = parse_algorithm(entry["algorithm"])
            hyper = default_hyperparams(alg)
            overrides = dict(entry.get("hyper", {}))
            overrides.setdefault("top_n", d.get("top_n", hyper.top_n))
            hyper = hyper.override(**overrides)
            algos.append(AlgorithmSpec(alg, hyper))
        cfg = ExperimentConfig(
            name=d["name"],
            dataset=dict(d["dataset"]),
            pair=tuple(d["pair"]),
            min_ratings=int(d["min_ratings"]),
            algorithms=tuple(algos),
            folds=int(d.get("folds", 5)),
            top_n=int(d.get("top_n", 10)),
            seed=int(d.get("seed", 42)),
            like_threshold=d.get("like_threshold"),
            output_dir=str(d.get("output_dir", "out")),
        )
        cfg.validate()
        return cfg

    @staticmethod
    def from_file(path):
        with open(path, encoding="utf-8") as fh:
            return ExperimentConfig.from_dict(json.load(fh))

    def to_dict(self):
        return {
            "name": self.name,
            "dataset": dict(self.dataset),
            "pair": list(self.pair),
            "min_ratings": self.min_ratings,
            "like_threshold": self.like_threshold,
            "algorithms": [spec.to_dict() for spec in self.algorithms],
            "folds": self.folds,
            "top_n": self.top_n,
            "seed": self.seed,
            "output_dir": self.output_dir,
        }


def load_dataset_spec(spec):
    kind = spec.get("kind")
    if kind == "movielens":
        return load_movielens(spec["ratings"], spec["movies"], spec["users"])
    if kind == "yelp":
        return load_yelp_restaurants(
            spec["business"], spec["review"], spec["photo"], spec["city"],
            min_label_count=spec.get("min_label_count", 50),
            min_user_ratings=spec.get("min_user_ratings", 50),
            region_labels=spec.get("region_labels"),
            strict=spec.get("strict", False),
        )
    if kind == "cache":
        return load_dataset(spec["path"])
    if kind == "demo":
        return make_demo_dataset()
    raise BiasAuditError(f"unknown dataset kind {kind!r}")


def derive_train_seed(seed, algo_index, fold):
    ss = np.random.SeedSequence([int(seed), int(algo_index), int(fold)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class AlgorithmResult:
    algorithm: Algorithm
    hyper: HyperParams
    fold_reports: list
    extreme_pr_output: list       # per fold: {category: PR over extreme users}
    ndcg_folds: list
    ndcg_skipped: int
    calibration_folds: list
    significance: object
    significance_groups: tuple
    bd_exclusions: dict           # category -> users with undefined per-user BD
    per_user_bd_mean: np.ndarray  # fold-averaged per-user |BD| sums


@dataclass
class AuditReport:
    config: dict
    dataset_fingerprint: str
    cohort_provenance: dict
    stats: object
    priors: dict
    input_pr: dict               # (group, category) -> PR on S
    extreme: dict
    results: list
    timing: dict = field(default_factory=dict)


class _StageTimer:
    def __init__(self):
        self.timing = {}

    def run(self, stage, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            out = fn(*args, **kwargs)
        except (BiasAuditError, OSError, KeyError, ValueError) as exc:
            raise PipelineError(stage, str(exc)) from exc
        self.timing[stage] = round(time.perf_counter() - t0, 3)
        return out


def _group_members(dataset):
    members = {ALL_GROUP: None}
    for label in dataset.user_groups.labels():
        members[label] = dataset.user_groups.members(label)
    return members


def _fold_train_set(cohort, split, fold):
    ds = cohort.dataset
    ids = np.concatenate([split.folds[fold][u][0] for u in range(ds.n_users)])
    return TrainSet.from_arrays(ds.n_users, ds.n_items, ds.users[ids], ds.items[ids], ds.ratings[ids])


def _evaluate_algorithm(spec, algo_index, cohort, S, split, fold_train_sets,
                        config, priors, extreme_users, group_members, shares_S):
    ds = cohort.dataset
    categories = list(cohort.category_pair)
    models = []
    for f, tset in enumerate(fold_train_sets):
        seed_f = derive_train_seed(config.seed, algo_index, f)
        models.append(train(spec.algorithm, tset, spec.hyper, seed_f))
    R_folds = build_R(models, split, cohort, config.top_n)

    fold_reports = []
    extreme_pr = []
    ndcg_folds = []
    calib_folds = []
    skipped = 0
    bd_sum_folds = np.zeros((split.k, ds.n_users))
    bd_defined = np.zeros(ds.n_users, dtype=bool)

    for f, R in enumerate(R_folds):
        fold_reports.append(
            compute_preference_report(S, R, group_members, cohort.pair_weights, categories, priors)
        )
        if len(extreme_users):
            extreme_pr.append(
                {c: preference_ratio(R, extreme_users, c, cohort.pair_weights) for c in categories}
            )

        ndcgs = []
        for u in range(ds.n_users):
            test_items = ds.items[split.folds[f][u][1]]
            if len(test_items) == 0:
                skipped += 1
                continue
            ndcgs.append(ndcg_at_k(R.items_of(u), test_items, config.top_n))
        ndcg_folds.append(float(np.mean(ndcgs)))

        shares_R = per_user_category_share(R, cohort.pair_weights, categories)
        kls = []
        for u in range(ds.n_users):
            if shares_S[u].sum() > 0:
                kls.append(kl_calibration(shares_S[u], shares_R[u], DEFAULT_CALIBRATION_ALPHA))
        calib_folds.append(float(np.mean(kls)))

        defined = shares_S > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            bd_user = (shares_R - shares_S) / shares_S
        bd_user = np.where(defined, np.abs(bd_user), 0.0)
        bd_sum_folds[f] = bd_user.sum(axis=1)
        bd_defined |= defined.any(axis=1)

    bd_exclusions = {
        c: int((shares_S[:, ci] == 0).sum()) for ci, c in enumerate(categories)
    }
    per_user_bd = bd_sum_folds.mean(axis=0)

    significance = None
    sig_groups = ()
    labels = ds.user_groups.labels()
    if len(labels) == 2:
        mean_report = _fold_mean_disparity(fold_reports)
        ga, gb = labels  # sorted: e.g. F before M
        stat = {
            g: sum(abs(mean_report[(g, c)]) for c in categories) for g in labels
        }
        samp = {
            g: per_user_bd[np.intersect1d(group_members[g], np.flatnonzero(bd_defined))]
            for g in labels
        }
        significance = group_significance(samp[ga], samp[gb], stat[ga], stat[gb])
        sig_groups = (ga, gb)

    return AlgorithmResult(
        algorithm=spec.algorithm,
        hyper=spec.hyper,
        fold_reports=fold_reports,
        extreme_pr_output=extreme_pr,
        ndcg_folds=ndcg_folds,
        ndcg_skipped=skipped,
        calibration_folds=calib_folds,
        significance=significance,
        significance_groups=sig_groups,
        bd_exclusions=bd_exclusions,
        per_user_bd_mean=per_user_bd,
    )


def _fold_mean_disparity(fold_reports):
    keys = fold_reports[0].disparity.keys()
    return {k: float(np.mean([r.disparity[k] for r in fold_reports])) for k in keys}


def run_experiment(config):
    """Execute the full audit pipeline; deterministic for a given config."""
    config.validate()
    timer = _StageTimer()

    dataset = timer.run("ingest", load_dataset_spec, config.dataset)
    cohort = timer.run(
        "cohort", build_experiment_subset, dataset, config.pair, config.min_ratings
    )
    stats = cohort_stats(cohort)
    S = binarize(cohort.dataset, config.like_threshold)

    categories = list(cohort.category_pair)
    priors = {c: category_prior(stats, c) for c in categories}
    group_members = _group_members(cohort.dataset)
    input_pr = {
        (g, c): preference_ratio(S, members, c, cohort.pair_weights)
        for g, members in group_members.items()
        for c in categories
    }

    # extreme users: zero input PR on the overall-dispreferred category
    zero_category = min(categories, key=lambda c: input_pr[(ALL_GROUP, c)])
    extreme_users = timer.run("extreme", select_extreme_users, S, cohort, zero_category)
    extreme_group_counts = {}
    for u in extreme_users:
        g = cohort.dataset.user_groups.group_of(int(u))
        extreme_group_counts[g] = extreme_group_counts.get(g, 0) + 1
    extreme_input_pr = {}
    if len(extreme_users):
        extreme_input_pr = {
            c: preference_ratio(S, extreme_users, c, cohort.pair_weights)
            for c in categories
        }

    split = timer.run("split", userfixed_kfold, cohort, config.folds, config.seed)
    fold_train_sets = [_fold_train_set(cohort, split, f) for f in range(split.k)]

    shares_S = per_user_category_share(S, cohort.pair_weights, categories)
    results = []
    for a, spec in enumerate(config.algorithms):
        _logger.info("evaluating %s (%d folds)", spec.algorithm.value, config.folds)
        results.append(
            timer.run(
                f"evaluate:{spec.algorithm.value}", _evaluate_algorithm,
                spec, a, cohort, S, split, fold_train_sets, config, priors,
                extreme_users, group_members, shares_S,
            )
        )

    report = AuditReport(
        config=config.to_dict(),
        dataset_fingerprint=cohort.provenance["source_fingerprint"],
        cohort_provenance=dict(cohort.provenance),
        stats=stats,
        priors=priors,
        input_pr=input_pr,
        extreme={
            "zero_category": zero_category,
            "count": int(len(extreme_users)),
            "group_counts": dict(sorted(extreme_group_counts.items())),
            "users": [cohort.dataset.user_ids[int(u)] for u in extreme_users],
            "input_pr": extreme_input_pr,
        },
        results=results,
        timing=timer.timing,
    )
    _check_completeness(report, config, categories, bool(len(extreme_users)))
    return report


def _check_completeness(report, config, categories, have_extreme):
    configured = [s.algorithm for s in config.algorithms]
    seen = [r.algorithm for r in report.results]
    if configured != seen:
        raise PipelineError("report", "algorithm results do not match the configured list")
    for res in report.results:
        if len(res.fold_reports) != config.folds or len(res.ndcg_folds) != config.folds:
            raise PipelineError("report", f"{res.algorithm.value}: missing folds")
        for rep in res.fold_reports:
            for g in [ALL_GROUP] + [k for k in report.stats.group_sizes]:
                for c in categories:
                    if (g, c) not in rep.pr_output:
                        raise PipelineError(
                            "report", f"{res.algorithm.value}: missing cell ({g}, {c})"
                        )
        if have_extreme and len(res.extreme_pr_output) != config.folds:
            raise PipelineError("report", f"{res.algorithm.value}: missing extreme cells")


# ---------------------------------------------------------------------------
# Emission


def _mean_std(values):
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def _json_safe(x):
    """NaN (undefined disparity) renders as null in the JSON artifacts."""
    return None if isinstance(x, float) and np.isnan(x) else x


def _algorithm_dict(res, report, categories):
    scopes = {"general": {}, "group": {}, "extreme": {}}
    groups = [ALL_GROUP] + list(report.stats.group_sizes)
    mean_bd = _fold_mean_disparity(res.fold_reports)
    for g in groups:
        cell = {}
        for c in categories:
            pr_folds = [rep.pr_output[(g, c)] for rep in res.fold_reports]
            pr_mean, pr_std = _mean_std(pr_folds)
            bd_folds = [rep.disparity[(g, c)] for rep in res.fold_reports]
            cell[c] = {
                "pr_input": report.input_pr[(g, c)],
                "pr_output_mean": pr_mean,
                "pr_output_std": pr_std,
                "bias_disparity_mean": _json_safe(mean_bd[(g, c)]),
                "bias_disparity_folds": [_json_safe(v) for v in bd_folds],
            }
        if g == ALL_GROUP:
            scopes["general"][g] = cell
        else:
            scopes["group"][g] = cell
    if res.extreme_pr_output:
        cell = {}
        for c in categories:
            pr_folds = [per_fold[c] for per_fold in res.extreme_pr_output]
            pr_mean, pr_std = _mean_std(pr_folds)
            cell[c] = {"pr_output_mean": pr_mean, "pr_output_std": pr_std}
        scopes["extreme"][EXTREME_GROUP] = cell

    ndcg_mean, ndcg_std = _mean_std(res.ndcg_folds)
    calib_mean, calib_std = _mean_std(res.calibration_folds)
    out = {
        "hyper": vars(res.hyper).copy(),
        "ndcg": {"mean": ndcg_mean, "std": ndcg_std, "folds": list(res.ndcg_folds),
                 "skipped_users": res.ndcg_skipped},
        "calibration": {"mean": calib_mean, "std": calib_std,
                        "folds": list(res.calibration_folds)},
        "scopes": scopes,
        "bd_excluded_users": dict(res.bd_exclusions),
    }
    if res.significance is not None:
        sig = res.significance
        out["significance"] = {
            "group_a": res.significance_groups[0],
            "group_b": res.significance_groups[1],
            "group_a_stat": _json_safe(sig.group_a_stat),
            "group_b_stat": _json_safe(sig.group_b_stat),
            "p_value": _json_safe(sig.p_value),
            "test_name": sig.test_name,
            "n_a": sig.n_a,
            "n_b": sig.n_b,
        }
    return out


def report_to_dict(report):
    categories = list(report.priors)
    stats = report.stats
    return {
        "name": report.config["name"],
        "config": report.config,
        "dataset_fingerprint": report.dataset_fingerprint,
        "cohort": {
            "n_users": stats.n_users,
            "n_items": stats.n_items,
            "n_interactions": stats.n_interactions,
            "group_sizes": dict(stats.group_sizes),
            "category_sizes": dict(stats.category_sizes),
            "density": stats.density,
            "sparsity": stats.sparsity,
            "provenance": dict(report.cohort_provenance),
        },
        "category_priors": dict(report.priors),
        "input_preference_ratio": {
            g: {c: report.input_pr[(g, c)] for c in categories}
            for g in [ALL_GROUP] + list(stats.group_sizes)
        },
        "extreme": {
            "zero_category": report.extreme["zero_category"],
            "count": report.extreme["count"],
            "group_counts": report.extreme["group_counts"],
            "users": list(report.extreme["users"]),
            "input_pr": dict(report.extreme["input_pr"]),
        },
        "algorithms": {
            res.algorithm.value: _algorithm_dict(res, report, categories)
            for res in report.results
        },
    }


def _metrics_csv(report, categories):
    lines = ["experiment,algorithm,fold,scope,group,category,pr_input,pr_output,"
             "bias_input,bias_output,bias_disparity"]
    name = report.config["name"]
    groups = [ALL_GROUP] + list(report.stats.group_sizes)
    for res in report.results:
        for f, rep in enumerate(res.fold_reports):
            for g in groups:
                scope = "general" if g == ALL_GROUP else "group"
                for c in categories:
                    key = (g, c)
                    bd = rep.disparity[key]
                    bd_s = "" if np.isnan(bd) else repr(bd)
                    lines.append(
                        f"{name},{res.algorithm.value},{f},{scope},{g},{c},"
                        f"{rep.pr_input[key]!r},{rep.pr_output[key]!r},"
                        f"{rep.bias_input[key]!r},{rep.bias_output[key]!r},{bd_s}"
                    )
        for f, per_fold in enumerate(res.extreme_pr_output):
            for c in categories:
                pr_in = report.extreme["input_pr"][c]
                pr_out = per_fold[c]
                prior = report.priors[c]
                bd_s = repr((pr_out - pr_in) / pr_in) if pr_in > 0 else ""
                lines.append(
                    f"{name},{res.algorithm.value},{f},extreme,{EXTREME_GROUP},{c},"
                    f"{pr_in!r},{pr_out!r},{pr_in / prior!r},{pr_out / prior!r},{bd_s}"
                )
    return "\n".join(lines) + "\n"


def _significance_csv(report):
    lines = ["experiment,algorithm,group_a_stat,group_b_stat,p_value,test_name"]
    name = report.config["name"]
    for res in report.results:
        if res.significance is None:
            continue
        s = res.significance
        lines.append(
            f"{name},{res.algorithm.value},{s.group_a_stat!r},{s.group_b_stat!r},"
            f"{s.p_value!r},{s.test_name}"
        )
    return "\n".join(lines) + "\n"


def _ndcg_csv(report):
    lines = ["experiment,algorithm,fold,ndcg"]
    name = report.config["name"]
    for res in report.results:
        for f, v in enumerate(res.ndcg_folds):
            lines.append(f"{name},{res.algorithm.value},{f},{v!r}")
    return "\n".join(lines) + "\n"


def _safe_name(label):
    return label.replace("/", "-").replace(" ", "_")


def _charts(report, categories):
    algs = [res.algorithm.value for res in report.results]
    groups = [ALL_GROUP] + list(report.stats.group_sizes)
    charts = {}
    for c in categories:
        pr_series = []
        bd_series = []
        for g in groups:
            pr_vals, bd_vals = [], []
            for res in report.results:
                pr_vals.append(float(np.mean([rep.pr_output[(g, c)] for rep in res.fold_reports])))
                bd_vals.append(float(np.mean([rep.disparity[(g, c)] for rep in res.fold_reports])))
            pr_series.append((g, pr_vals))
            bd_series.append((g, bd_vals))
        input_pr = report.input_pr[(ALL_GROUP, c)]
        charts[f"pr_{_safe_name(c)}.svg"] = grouped_bar_svg(
            f"Output preference ratio: {c}", algs, pr_series,
            y_label="preference ratio",
            baselines=[("data-input-pr", input_pr)],
            y_floor=0.0, y_ceil=1.0,
        )
        charts[f"bd_{_safe_name(c)}.svg"] = grouped_bar_svg(
            f"Bias disparity: {c}", algs, bd_series,
            y_label="bias disparity",
        )
    return charts


def emit_report(report, output_dir):
    """Write CSVs, JSON summary, provenance, charts, and (separately) timing."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    categories = list(report.priors)

    written = []

    def emit(name, text):
        path = output_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        written.append(path)

    emit("report.json", json.dumps(report_to_dict(report), indent=2) + "\n")
    emit("metrics.csv", _metrics_csv(report, categories))
    emit("significance.csv", _significance_csv(report))
    emit("ndcg.csv", _ndcg_csv(report))
    provenance = {
        "tool": "biasaudit",
        "version": __version__,
        "dataset_fingerprint": report.dataset_fingerprint,
        "cohort": dict(report.cohort_provenance),
        "config": report.config,
    }
    emit("provenance.json", json.dumps(provenance, indent=2) + "\n")
    for name, svg in _charts(report, categories).items():
        emit(f"charts/{name}", svg)
    # wall-clock times are run-dependent by nature; kept out of the
    # byte-determinism contract above
    (output_dir / "timing.json").write_text(
        json.dumps(report.timing, indent=2) + "\n", encoding="utf-8"
    )
    return written
