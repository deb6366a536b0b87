"""Command-line entry points.

Exit codes: 0 clean, 2 completed with logged per-item failures, 1 fatal or
configuration error.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import smapio
from .pipeline import (
    ConfigError,
    build_report,
    compute_maps,
    load_config,
    make_explainers,
    make_images,
    make_model,
    run_experiment,
    write_report,
    write_scores_csv,
    _applicable_metrics,
    _instances,
)
from .registry import instance_label
from .report import emit as emit_plots


def _config(path, seed, jobs, out):
    cfg = load_config(path)
    if seed is not None:
        cfg.seed = seed
    if jobs is not None:
        cfg.jobs = jobs
    if out is not None:
        cfg.output = out
    return cfg


common = [
    click.option("--config", "config_path", required=True, type=click.Path(exists=True)),
    click.option("--out", default=None, help="output directory (overrides config)"),
    click.option("--jobs", default=None, type=int),
    click.option("--seed", default=None, type=int),
]


def add_common(fn):
    for opt in reversed(common):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """Saliency-map metric benchmark."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")


def _finish(summary):
    if summary["failures"]:
        click.echo(f"completed with {summary['failures']} logged failures")
        sys.exit(2)
    click.echo(f"ok: {summary['rows']} score rows in {summary['out']}")


@main.command()
@add_common
@click.option("--only", default=None, help="comma-separated metric subset")
def run(config_path, out, jobs, seed, only):
    """Full pipeline: maps, metrics, statistics, reports and figures."""
    try:
        cfg = _config(config_path, seed, jobs, out)
        if only:
            cfg.metrics = only.split(",")
        summary = run_experiment(cfg, cfg.output, cfg.jobs)
        report = json.loads((summary["out"] / "report.json").read_text())
        emit_plots(report, summary["out"])
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    _finish(summary)


@main.command()
@add_common
def explain(config_path, out, jobs, seed):
    """Compute and cache saliency maps only."""
    try:
        cfg = _config(config_path, seed, jobs, out)
        ids, images, failures = make_images(cfg)
        model = make_model(cfg)
        entries = make_explainers(cfg, model)
        out_dir = Path(cfg.output)
        compute_maps(entries, model, ids, images, out_dir / "cache", cfg.seed)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"cached maps for {len(ids)} images x {len(entries)} methods")
    sys.exit(2 if failures else 0)


@main.command()
@add_common
@click.option("--only", default=None, help="comma-separated metric subset")
def score(config_path, out, jobs, seed, only):
    """Metrics on cached maps (maps are recomputed only on cache misses)."""
    try:
        cfg = _config(config_path, seed, jobs, out)
        if only:
            cfg.metrics = only.split(",")
        summary = run_experiment(cfg, cfg.output, cfg.jobs)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    _finish(summary)


@main.command()
@add_common
def stats(config_path, out, jobs, seed):
    """Statistics from an existing scores.csv."""
    try:
        cfg = _config(config_path, seed, jobs, out)
        out_dir = Path(cfg.output)
        rows = _read_scores(out_dir / "scores.csv")
        ids = sorted({r[0] for r in rows})
        methods = sorted({r[1] for r in rows})
        instances = sorted({(r[2], r[3]) for r in rows})
        report = build_report(cfg, rows, ids, methods, instances)
        write_report(out_dir, report)
    except (ConfigError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"statistics written to {out_dir}")


@main.command()
@add_common
def report(config_path, out, jobs, seed):
    """Plot data and figures from an existing report.json."""
    try:
        cfg = _config(config_path, seed, jobs, out)
        out_dir = Path(cfg.output)
        data = json.loads((out_dir / "report.json").read_text())
        emit_plots(data, out_dir)
    except (ConfigError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"plot data and figures written to {out_dir}")


def _read_scores(path: Path):
    import csv

    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            value = float(rec["value"]) if rec["value"] else float("nan")
            rows.append(
                (rec["image_id"], rec["method"], rec["metric"],
                 rec["baseline"] or None, value)
            )
    return rows


if __name__ == "__main__":
    main()
