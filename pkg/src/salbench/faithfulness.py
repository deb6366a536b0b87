"""Faithfulness metrics: probability response of the model to removing the
features an explanation claims matter.

All scalar metrics return ``nan`` (the undefined-score sentinel, see
``sentinel.py``) when a correlation is degenerate; curve metrics return a
``(values, grid)`` pair with the grid giving the fraction of features
removed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .perturb import BaselineSpec, PerturbationPlan, apply_baseline, default_plan
from .sentinel import UNDEFINED
from .tensors import check_image, check_map, descending_order, patch_pixel_indices

__all__ = [
    "FaithfulnessConfig",
    "faithfulness_correlation",
    "faithfulness_estimate",
    "monotonicity_arya_ratio",
    "monotonicity_nguyen",
    "pixel_flipping_curve",
    "selectivity_curve",
]


@dataclass(frozen=True)
class FaithfulnessConfig:
    baseline: BaselineSpec = field(default_factory=lambda: BaselineSpec("black"))
    subset_size: int | None = None  # Faithfulness Correlation |S|; default 5%
    runs: int = 100  # Faithfulness Correlation run count
    steps: int | None = None  # removal steps; default one per image row
    patch_size: int | None = None  # Selectivity patch width
    seed: int = 0


def _target_class(model, image: np.ndarray) -> int:
    return int(np.argmax(model.predict(image)))


def _plan(cfg: FaithfulnessConfig, image: np.ndarray) -> PerturbationPlan:
    _, h, w = image.shape
    return default_plan(h * w, cfg.steps if cfg.steps is not None else h)


def _chunks(order: np.ndarray, plan: PerturbationPlan) -> list[np.ndarray]:
    out, pos = [], 0
    for size in plan.schedule:
        out.append(order[pos : pos + size])
        pos += size
    return out


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    if np.std(a) == 0 or np.std(b) == 0:
        return UNDEFINED
    return float(np.corrcoef(a, b)[0, 1])


def _spearman(a: np.ndarray, b: np.ndarray) -> float:
    if np.std(a) == 0 or np.std(b) == 0:
        return UNDEFINED
    return float(stats.spearmanr(a, b).statistic)


def faithfulness_correlation(model, image, smap, cfg: FaithfulnessConfig) -> float:
    """Pearson r between probability drops and summed attributions of
    random feature subsets."""
    image = check_image(image)
    smap = check_map(smap)
    if cfg.runs < 2:
        raise ValueError("faithfulness correlation needs at least 2 runs")
    _, h, w = image.shape
    n = h * w
    subset = cfg.subset_size if cfg.subset_size is not None else max(1, n // 20)
    if not 1 <= subset <= n:
        raise ValueError(f"subset size {subset} out of range for {n} features")
    target = _target_class(model, image)
    p0 = model.predict(image)[target]
    rng = np.random.default_rng(cfg.seed)
    baseline_rng = cfg.baseline.make_rng()
    flat = smap.ravel()
    drops = np.empty(cfg.runs)
    sums = np.empty(cfg.runs)
    for r in range(cfg.runs):
        idx = rng.choice(n, size=subset, replace=False)
        perturbed = apply_baseline(image, idx, cfg.baseline, baseline_rng)
        drops[r] = p0 - model.predict(perturbed)[target]
        sums[r] = flat[idx].sum()
    return _pearson(drops, sums)


def faithfulness_estimate(model, image, smap, cfg: FaithfulnessConfig) -> float:
    """Pearson r between per-step probability drops under cumulative
    descending removal and the attribution removed at each step."""
    image = check_image(image)
    smap = check_map(smap)
    plan = _plan(cfg, image)
    order = descending_order(smap)
    target = _target_class(model, image)
    baseline_rng = cfg.baseline.make_rng()
    flat = smap.ravel()
    current = image
    prev = model.predict(current)[target]
    drops = np.empty(plan.steps)
    sums = np.empty(plan.steps)
    for t, chunk in enumerate(_chunks(order, plan)):
        current = apply_baseline(current, chunk, cfg.baseline, baseline_rng)
        p = model.predict(current)[target]
        drops[t] = prev - p
        sums[t] = flat[chunk].sum()
        prev = p
    return _pearson(drops, sums)


def monotonicity_arya_ratio(model, image, smap, cfg: FaithfulnessConfig) -> float:
    """Fraction of insertion steps (ascending attribution) where the
    target-class probability does not decrease."""
    image = check_image(image)
    smap = check_map(smap)
    plan = _plan(cfg, image)
    ascending = descending_order(smap)[::-1]
    target = _target_class(model, image)
    baseline_rng = cfg.baseline.make_rng()
    _, h, w = image.shape
    current = apply_baseline(image, np.arange(h * w), cfg.baseline, baseline_rng)
    prev = model.predict(current)[target]
    good = 0
    flat_img = image.reshape(image.shape[0], h * w)
    for chunk in _chunks(ascending, plan):
        restored = current.copy()
        restored.reshape(image.shape[0], h * w)[:, chunk] = flat_img[:, chunk]
        current = restored
        p = model.predict(current)[target]
        if p >= prev:
            good += 1
        prev = p
    return good / plan.steps


def monotonicity_nguyen(model, image, smap, cfg: FaithfulnessConfig) -> float:
    """Spearman rho between chunk attributions and the absolute probability
    change when only that chunk is baselined."""
    image = check_image(image)
    smap = check_map(smap)
    plan = _plan(cfg, image)
    order = descending_order(smap)
    target = _target_class(model, image)
    p0 = model.predict(image)[target]
    baseline_rng = cfg.baseline.make_rng()
    flat = smap.ravel()
    diffs = np.empty(plan.steps)
    sums = np.empty(plan.steps)
    for t, chunk in enumerate(_chunks(order, plan)):
        perturbed = apply_baseline(image, chunk, cfg.baseline, baseline_rng)
        diffs[t] = abs(p0 - model.predict(perturbed)[target])
        sums[t] = flat[chunk].sum()
    return _spearman(sums, diffs)


def pixel_flipping_curve(model, image, smap, cfg: FaithfulnessConfig):
    """Target-class probability after cumulative descending removal;
    includes the unperturbed point at fraction 0."""
    image = check_image(image)
    smap = check_map(smap)
    plan = _plan(cfg, image)
    order = descending_order(smap)
    target = _target_class(model, image)
    baseline_rng = cfg.baseline.make_rng()
    values = [model.predict(image)[target]]
    grid = [0.0]
    current = image
    removed = 0
    for chunk in _chunks(order, plan):
        current = apply_baseline(current, chunk, cfg.baseline, baseline_rng)
        removed += chunk.size
        values.append(model.predict(current)[target])
        grid.append(removed / plan.total)
    return np.asarray(values), np.asarray(grid)


def selectivity_curve(model, image, smap, cfg: FaithfulnessConfig):
    """Pixel flipping over square patches, one patch per step."""
    image = check_image(image)
    smap = check_map(smap)
    _, h, w = image.shape
    patch = cfg.patch_size if cfg.patch_size is not None else max(1, h // 14)
    patch_order = descending_order(smap, patch_size=patch)
    target = _target_class(model, image)
    baseline_rng = cfg.baseline.make_rng()
    values = [model.predict(image)[target]]
    grid = [0.0]
    current = image
    total = len(patch_order)
    for step, pid in enumerate(patch_order, start=1):
        idx = patch_pixel_indices(h, w, patch, int(pid))
        current = apply_baseline(current, idx, cfg.baseline, baseline_rng)
        values.append(model.predict(current)[target])
        grid.append(step / total)
    return np.asarray(values), np.asarray(grid)
