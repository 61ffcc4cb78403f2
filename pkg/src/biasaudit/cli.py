"""Command-line interface.

Subcommands: ``ingest`` (parse a raw dataset and cache it), ``stats`` (cohort
statistics only), ``run`` (full experiment from a config file), and ``report``
(re-render charts from a previously emitted metrics.csv).  Exit codes: 0 on
success, 1 on usage/config errors, 2 on pipeline errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .charts import grouped_bar_svg, write_svg
from .cohort import build_experiment_subset, cohort_stats
from .errors import BiasAuditError
from .ingest import save_dataset
from .runner import ExperimentConfig, emit_report, load_dataset_spec, run_experiment

_logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PIPELINE = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(prog="biasaudit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config JSON")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default=None, help="override the config output directory")

    sub.add_parser("ingest", parents=[common], help="parse the configured dataset and cache it")
    sub.add_parser("stats", parents=[common], help="print cohort statistics")
    sub.add_parser("run", parents=[common], help="run the full experiment")

    rep = sub.add_parser("report", help="re-render charts from an output directory")
    rep.add_argument("--from", dest="from_dir", required=True, help="existing output directory")
    return parser


def _load_config(args):
    path = Path(args.config)
    if not path.is_file():
        raise _UsageError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise _UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw["output_dir"] = args.out
    try:
        return ExperimentConfig.from_dict(raw)
    except (BiasAuditError, KeyError, TypeError, ValueError) as exc:
        raise _UsageError(f"invalid config {path}: {exc}") from exc


def _cmd_ingest(args):
    config = _load_config(args)
    dataset = load_dataset_spec(config.dataset)
    out = Path(config.output_dir) / "cache"
    save_dataset(dataset, out)
    print(f"cached {dataset.n_interactions:,} interactions "
          f"({dataset.n_users:,} users, {dataset.n_items:,} items) to {out}")
    return EXIT_OK


def _cmd_stats(args):
    config = _load_config(args)
    dataset = load_dataset_spec(config.dataset)
    cohort = build_experiment_subset(dataset, config.pair, config.min_ratings)
    stats = cohort_stats(cohort)
    print(f"cohort {config.pair[0]}/{config.pair[1]} (min_ratings={config.min_ratings})")
    print(f"users: {stats.n_users:,}")
    for g, n in stats.group_sizes.items():
        print(f"  {g}: {n:,}")
    print(f"items: {stats.n_items:,}")
    for c, n in stats.category_sizes.items():
        print(f"  {c}: {n:g}")
    print(f"interactions: {stats.n_interactions:,}")
    print(f"density: {stats.density:.3f} (sparsity {stats.sparsity:.3f})")
    return EXIT_OK


def _cmd_run(args):
    config = _load_config(args)
    report = run_experiment(config)
    written = emit_report(report, config.output_dir)
    print(f"wrote {len(written)} report files to {config.output_dir}")
    return EXIT_OK


def _cmd_report(args):
    from_dir = Path(args.from_dir)
    metrics_path = from_dir / "metrics.csv"
    if not metrics_path.is_file():
        raise _UsageError(f"no metrics.csv under {from_dir}")
    rows = metrics_path.read_text(encoding="utf-8").splitlines()
    header = rows[0].split(",")
    idx = {name: k for k, name in enumerate(header)}
    cells = {}
    inputs = {}
    algorithms = []
    categories = []
    groups = []
    for row in rows[1:]:
        parts = row.split(",")
        if parts[idx["scope"]] == "extreme":
            continue
        alg, group, cat = parts[idx["algorithm"]], parts[idx["group"]], parts[idx["category"]]
        for seq, val in ((algorithms, alg), (categories, cat), (groups, group)):
            if val not in seq:
                seq.append(val)
        cells.setdefault((alg, group, cat), []).append(
            (float(parts[idx["pr_output"]]),
             float(parts[idx["bias_disparity"]]) if parts[idx["bias_disparity"]] else float("nan"))
        )
        inputs[(group, cat)] = float(parts[idx["pr_input"]])

    count = 0
    for c in categories:
        pr_series, bd_series = [], []
        for g in groups:
            pr_series.append((g, [
                float(np.mean([v[0] for v in cells[(a, g, c)]])) for a in algorithms
            ]))
            bd_series.append((g, [
                float(np.mean([v[1] for v in cells[(a, g, c)]])) for a in algorithms
            ]))
        safe = c.replace("/", "-").replace(" ", "_")
        write_svg(
            grouped_bar_svg(f"Output preference ratio: {c}", algorithms, pr_series,
                            y_label="preference ratio",
                            baselines=[("data-input-pr", inputs[("ALL", c)])],
                            y_floor=0.0, y_ceil=1.0),
            from_dir / "charts" / f"pr_{safe}.svg",
        )
        write_svg(
            grouped_bar_svg(f"Bias disparity: {c}", algorithms, bd_series,
                            y_label="bias disparity"),
            from_dir / "charts" / f"bd_{safe}.svg",
        )
        count += 2
    print(f"rendered {count} charts under {from_dir / 'charts'}")
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "stats": _cmd_stats,
    "run": _cmd_run,
    "report": _cmd_report,
}


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return EXIT_USAGE
    except (BiasAuditError, OSError) as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
