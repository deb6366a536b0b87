"""Experiment orchestration: config parsing, dataset ingestion, map
caching, metric scheduling and report emission."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import smapio
from .explainers import Explainer, RiseConfig, make_builtin_explainer
from .faithfulness import (
    FaithfulnessConfig,
    faithfulness_correlation,
    faithfulness_estimate,
    monotonicity_arya_ratio,
    monotonicity_nguyen,
    pixel_flipping_curve,
    selectivity_curve,
)
from .complexity import complexity, effective_complexity, sparseness
from .models import PlantedEvidenceModel, TinyMLP, make_planted_model
from .perturb import BASELINE_KINDS, BaselineSpec
from .randomization import (
    RandomizationConfig,
    model_parameter_randomization_curve,
    random_logit_distance,
)
from .registry import METRICS, instance_label, metric_names
from .robustness import (
    RobustnessConfig,
    avg_sensitivity,
    local_lipschitz_estimate,
    max_sensitivity,
)
from .sentinel import is_undefined
from .stats import auc, build_score_matrix, correlate_metrics, rank_methods
from .tensors import check_image

log = logging.getLogger("salbench")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    seed: int = 0
    dataset: dict = field(default_factory=lambda: {"kind": "synthetic", "count": 4})
    model: dict = field(default_factory=lambda: {"kind": "planted"})
    explainers: list = field(default_factory=lambda: ["gaussian", "sobel", "random"])
    metrics: list | str = "all"
    baselines: list = field(default_factory=lambda: ["black"])
    metric_params: dict = field(default_factory=dict)
    output: str = "out"
    jobs: int = 1

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        if not cfg.explainers:
            raise ConfigError("explainer roster must not be empty")
        for b in cfg.baselines:
            if b not in BASELINE_KINDS:
                raise ConfigError(f"unknown baseline kind: {b!r}")
        try:
            metric_names(cfg.metrics)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    import yaml

    raw = yaml.safe_load(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ConfigError("config file must contain a mapping")
    return ExperimentConfig.from_dict(raw)


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0] % (2**31))


# ---------------------------------------------------------------------------
# dataset


def synthetic_images(count: int, shape, seed: int):
    ids, images = [], []
    for i in range(count):
        rng = np.random.default_rng([seed, 1000 + i])
        images.append(rng.random(tuple(shape)))
        ids.append(f"synthetic_{i:04d}")
    return ids, images, 0


def ingest_directory(path: Path, shape) -> tuple[list[str], list[np.ndarray], int]:
    from PIL import Image

    c, h, w = shape
    ids, images, failures = [], [], 0
    for file in sorted(path.iterdir()):
        if file.suffix.lower() != ".png":
            continue
        try:
            with Image.open(file) as im:
                im = im.convert("RGB" if c == 3 else "L")
                im = im.resize((w, h), Image.BILINEAR)
                arr = np.asarray(im, dtype=np.float64) / 255.0
            if arr.ndim == 2:
                arr = np.repeat(arr[None, :, :], c, axis=0)
            else:
                arr = arr.transpose(2, 0, 1)
            images.append(check_image(arr))
            ids.append(file.stem)
        except Exception as exc:  # noqa: BLE001 - per-file isolation
            failures += 1
            log.warning("failed to ingest %s: %s", file, exc)
    return ids, images, failures


def make_images(cfg: ExperimentConfig):
    ds = cfg.dataset
    shape = tuple(ds.get("shape", (3, 16, 16)))
    if ds.get("kind", "synthetic") == "synthetic":
        return synthetic_images(ds.get("count", 4), shape, ds.get("seed", cfg.seed))
    if ds.get("kind") == "directory":
        path = Path(ds["path"])
        if not path.is_dir():
            raise ConfigError(f"dataset directory not found: {path}")
        return ingest_directory(path, shape)
    raise ConfigError(f"unknown dataset kind: {ds.get('kind')!r}")


# ---------------------------------------------------------------------------
# model / explainer factories


def make_model(cfg: ExperimentConfig):
    spec = cfg.model
    shape = tuple(cfg.dataset.get("shape", (3, 16, 16)))
    kind = spec.get("kind", "planted")
    if kind == "planted":
        return make_planted_model(
            shape,
            seed=spec.get("seed", cfg.seed),
            region_size=spec.get("region_size"),
            weight_scale=spec.get("weight_scale", 1.0),
            bias=spec.get("bias", 0.0),
        )
    if kind == "mlp":
        return TinyMLP(
            input_shape=shape,
            num_classes=spec.get("classes", 10),
            hidden=spec.get("hidden", 32),
            seed=spec.get("seed", cfg.seed),
        )
    if kind == "bridge":
        from .bridge_client import BridgeModel

        return BridgeModel.connect(spec["address"])
    raise ConfigError(f"unknown model kind: {kind!r}")


@dataclass
class MethodEntry:
    name: str
    explainer: Explainer | None  # None for precomputed map directories
    map_dir: Path | None = None

    @property
    def reexplainable(self) -> bool:
        return self.explainer is not None


def make_explainers(cfg: ExperimentConfig, model) -> list[MethodEntry]:
    entries: list[MethodEntry] = []
    for item in cfg.explainers:
        if isinstance(item, str):
            item = {"name": item}
        name = item["name"]
        if name == "maps":
            entries.append(
                MethodEntry(item.get("label", Path(item["path"]).name), None,
                            Path(item["path"]))
            )
        elif name == "rise":
            rise_cfg = RiseConfig(
                num_masks=item.get("num_masks", 4000),
                grid_size=item.get("grid_size", 7),
                keep_prob=item.get("keep_prob", 0.5),
            )
            entries.append(MethodEntry("rise", make_builtin_explainer("rise", rise_cfg)))
        elif name.startswith("bridge:"):
            from .bridge_client import bridge_explainer

            entries.append(MethodEntry(name, bridge_explainer(model, name[7:])))
        else:
            try:
                entries.append(MethodEntry(name, make_builtin_explainer(name)))
            except KeyError as exc:
                raise ConfigError(str(exc)) from exc
    names = [e.name for e in entries]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate explainer names: {names}")
    return entries


# ---------------------------------------------------------------------------
# saliency map cache


def compute_maps(entries, model, ids, images, cache_dir: Path, seed: int):
    """Per (method, image) maps, cached as SMAP files."""
    maps: dict[tuple[str, str], np.ndarray] = {}
    for m_idx, entry in enumerate(entries):
        for i_idx, (image_id, image) in enumerate(zip(ids, images)):
            if not entry.reexplainable:
                maps[(entry.name, image_id)] = smapio.load_map(
                    entry.map_dir / f"{image_id}.smap"
                )
                continue
            path = cache_dir / entry.name / f"{image_id}.smap"
            if path.exists():
                try:
                    maps[(entry.name, image_id)] = smapio.load_map(path)
                    continue
                except smapio.MapFormatError as exc:
                    log.warning("corrupt cache entry %s (%s); recomputing", path, exc)
            target = int(np.argmax(model.predict(image)))
            smap = entry.explainer.explain(
                model, image, target, seed=_derived_seed(seed, 1, m_idx, i_idx)
            )
            path.parent.mkdir(parents=True, exist_ok=True)
            smapio.save_map(path, smap)
            maps[(entry.name, image_id)] = smapio.load_map(path)
    return maps


# ---------------------------------------------------------------------------
# metric evaluation


def _faith_cfg(cfg: ExperimentConfig, baseline: str, seed: int) -> FaithfulnessConfig:
    params = cfg.metric_params.get("faithfulness", {})
    return FaithfulnessConfig(
        baseline=BaselineSpec(baseline, seed=seed),
        subset_size=params.get("subset_size"),
        runs=params.get("runs", 100),
        steps=params.get("steps"),
        patch_size=params.get("patch_size"),
        seed=seed,
    )


_FAITHFULNESS_FNS = {
    "faithfulness_correlation": faithfulness_correlation,
    "faithfulness_estimate": faithfulness_estimate,
    "monotonicity_arya": monotonicity_arya_ratio,
    "monotonicity_nguyen": monotonicity_nguyen,
}

_ROBUSTNESS_FNS = {
    "max_sensitivity": max_sensitivity,
    "avg_sensitivity": avg_sensitivity,
    "local_lipschitz": local_lipschitz_estimate,
}


def evaluate_metric(metric, model, image, smap, explainer, cfg, baseline, seed):
    """One (metric, baseline, method, image) evaluation, curves reduced to
    their AUC."""
    if metric in _FAITHFULNESS_FNS:
        return _FAITHFULNESS_FNS[metric](
            model, image, smap, _faith_cfg(cfg, baseline, seed)
        )
    if metric == "pixel_flipping":
        values, grid = pixel_flipping_curve(
            model, image, smap, _faith_cfg(cfg, baseline, seed)
        )
        return auc(values, grid)
    if metric == "selectivity":
        values, grid = selectivity_curve(
            model, image, smap, _faith_cfg(cfg, baseline, seed)
        )
        return auc(values, grid)
    if metric in _ROBUSTNESS_FNS:
        params = cfg.metric_params.get("robustness", {})
        rcfg = RobustnessConfig(
            radius=params.get("radius", 0.02),
            samples=params.get("samples", 10),
            seed=seed,
        )
        target = int(np.argmax(model.predict(image)))
        return _ROBUSTNESS_FNS[metric](model, explainer, image, target, rcfg)
    if metric == "sparseness":
        return sparseness(smap)
    if metric == "complexity":
        return complexity(smap)
    if metric == "effective_complexity":
        eps = cfg.metric_params.get("effective_complexity_epsilon", 0.1)
        return float(effective_complexity(smap, eps))
    if metric == "model_parameter_randomization":
        target = int(np.argmax(model.predict(image)))
        values, grid = model_parameter_randomization_curve(
            model, explainer, image, target, RandomizationConfig(seed=seed)
        )
        if len(values) == 1:
            return float(values[0])
        return auc(values, grid)
    if metric == "random_logit":
        target = int(np.argmax(model.predict(image)))
        return random_logit_distance(
            model, explainer, image, target, RandomizationConfig(seed=seed)
        )
    raise KeyError(f"unknown metric: {metric}")


# ---------------------------------------------------------------------------
# run


def _applicable_metrics(cfg: ExperimentConfig, model, entries) -> list[str]:
    names = metric_names(cfg.metrics)
    out = []
    reexplainable = all(e.reexplainable for e in entries)
    for name in names:
        spec = METRICS[name]
        if spec.needs_explainer and not reexplainable:
            log.warning("skipping %s: roster contains precomputed-map methods", name)
            continue
        if name == "model_parameter_randomization" and not hasattr(
            model, "randomize_top"
        ):
            log.warning("skipping %s: model has no randomizable layers", name)
            continue
        if name == "random_logit" and model.num_classes < 2:
            log.warning("skipping %s: model has fewer than 2 classes", name)
            continue
        out.append(name)
    if not out:
        raise ConfigError("no applicable metrics remain for this configuration")
    return out


def _instances(cfg: ExperimentConfig, metrics: list[str]):
    """(metric, baseline-or-None) metric-instance columns."""
    out = []
    for name in metrics:
        if METRICS[name].needs_baseline:
            out.extend((name, b) for b in cfg.baselines)
        else:
            out.append((name, None))
    return out


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path, jobs: int | None = None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = jobs or cfg.jobs

    ids, images, ingest_failures = make_images(cfg)
    if not ids:
        raise ConfigError("dataset produced no images")
    model = make_model(cfg)
    entries = make_explainers(cfg, model)
    metrics = _applicable_metrics(cfg, model, entries)
    instances = _instances(cfg, metrics)
    maps = compute_maps(entries, model, ids, images, out / "cache", cfg.seed)

    serial = not getattr(model, "threadsafe", False)
    rows = []
    failures = ingest_failures

    def one_image(i_idx):
        image_id, image = ids[i_idx], images[i_idx]
        local = []
        for m_idx, entry in enumerate(entries):
            smap = maps[(entry.name, image_id)]
            for inst_idx, (metric, baseline) in enumerate(instances):
                seed = _derived_seed(cfg.seed, 2, m_idx, i_idx, inst_idx)
                try:
                    value = evaluate_metric(
                        metric, model, image, smap, entry.explainer, cfg,
                        baseline, seed,
                    )
                except Exception as exc:  # noqa: BLE001 - per-item isolation
                    log.error(
                        "metric %s failed for %s/%s: %s",
                        metric, entry.name, image_id, exc,
                    )
                    local.append((image_id, entry.name, metric, baseline, None))
                    continue
                local.append((image_id, entry.name, metric, baseline, value))
        return local

    if jobs > 1 and not serial:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for local in pool.map(one_image, range(len(ids))):
                rows.extend(local)
    else:
        for i_idx in range(len(ids)):
            rows.extend(one_image(i_idx))

    failures += sum(1 for r in rows if r[4] is None)
    rows = [r for r in rows if r[4] is not None]

    write_scores_csv(out / "scores.csv", rows)
    report = build_report(cfg, rows, ids, [e.name for e in entries], instances)
    write_report(out, report)
    return {"failures": failures, "rows": len(rows), "out": out}


# ---------------------------------------------------------------------------
# aggregation & artifacts


def build_report(cfg, rows, ids, methods, instances):
    columns = [instance_label(m, b) for m, b in instances]
    index = {(r[0], r[1], instance_label(r[2], r[3])): r[4] for r in rows}
    per_image = {
        (method, col): np.array(
            [index.get((image_id, method, col), np.nan) for image_id in ids]
        )
        for method in methods
        for col in columns
    }
    matrix = build_score_matrix(per_image, methods, columns, len(ids))

    directions = {
        instance_label(m, b): METRICS[m].higher_better for m, b in instances
    }
    ranks = {}
    for j, col in enumerate(columns):
        scores = np.column_stack([per_image[(m, col)] for m in methods])
        try:
            table = rank_methods(scores, methods, directions[col])
        except ValueError:
            continue
        ranks[col] = {
            "average": table.average.tolist(),
            "excluded_images": table.excluded_images,
        }

    report = {
        "config": {
            "seed": cfg.seed,
            "baselines": list(cfg.baselines),
            "metrics": sorted({m for m, _ in instances}),
        },
        "methods": methods,
        "columns": columns,
        "directions": directions,
        "matrix": matrix.values.tolist(),
        "exclusions": matrix.exclusions.tolist(),
        "image_count": len(ids),
        "ranks": ranks,
        "correlations": {},
        "baseline_ablation": {},
    }

    stats_params = cfg.metric_params.get("stats", {})
    p_trials = stats_params.get("p_trials", 2000)
    if len(methods) >= 3 and len(columns) >= 2:
        groups: dict[str, list[int]] = {}
        for j, (m, _) in enumerate(instances):
            groups.setdefault(METRICS[m].family, []).append(j)
        corr = correlate_metrics(
            matrix, groups, p_trials=p_trials, p_seed=cfg.seed
        )
        report["correlations"]["all"] = _corr_dict(corr)

        # cross-baseline concordance per faithfulness metric
        for metric in sorted({m for m, b in instances if b is not None}):
            cols = [j for j, (m, b) in enumerate(instances) if m == metric]
            if len(cols) < 2:
                continue
            sub = build_score_matrix(
                {
                    (meth, columns[j]): per_image[(meth, columns[j])]
                    for meth in methods
                    for j in cols
                },
                methods,
                [columns[j] for j in cols],
                len(ids),
            )
            sub_corr = correlate_metrics(sub, p_trials=p_trials, p_seed=cfg.seed)
            report["baseline_ablation"][metric] = _corr_dict(sub_corr)
    return report


def _corr_dict(corr):
    out = {
        "columns": corr.columns,
        "tau": corr.tau.tolist(),
        "pvals": corr.pvals.tolist(),
        "alpha": corr.alpha,
        "holm_mask_full": corr.full_mask.tolist(),
    }
    for name, mask in corr.group_masks.items():
        out[f"holm_mask_{name}"] = mask.tolist()
    return out


def write_scores_csv(path: Path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "method", "metric", "baseline", "value",
                         "is_curve"])
        for image_id, method, metric, baseline, value in rows:
            writer.writerow([
                image_id, method, metric, baseline or "",
                "" if is_undefined(value) else repr(float(value)),
                int(METRICS[metric].curve),
            ])


def _write_matrix_csv(path: Path, row_labels, col_labels, values):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + list(col_labels))
        for label, row in zip(row_labels, values):
            writer.writerow([label] + [repr(float(v)) for v in row])


def write_report(out: Path, report: dict) -> None:
    _write_matrix_csv(
        out / "matrix.csv", report["methods"], report["columns"], report["matrix"]
    )
    for group, corr in list(report["correlations"].items()) + [
        (f"baselines_{m}", c) for m, c in report["baseline_ablation"].items()
    ]:
        cols = corr["columns"]
        _write_matrix_csv(out / f"tau_{group}.csv", cols, cols, corr["tau"])
        _write_matrix_csv(out / f"pvals_{group}.csv", cols, cols, corr["pvals"])
        _write_matrix_csv(out / f"holm_mask_{group}.csv", cols, cols,
                          corr["holm_mask_full"])
    for col, table in report["ranks"].items():
        safe = col.replace("/", "_")
        with open(out / f"ranks_{safe}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "average_rank"])
            for method, rank in zip(report["methods"], table["average"]):
                writer.writerow([method, repr(float(rank))])
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
