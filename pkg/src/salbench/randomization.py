"""Randomization metrics: do explanations react when the model's weights or
the explained class are randomized?"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .sentinel import UNDEFINED, is_undefined
from .tensors import check_image

__all__ = [
    "RandomizationConfig",
    "spearman_similarity",
    "model_parameter_randomization_curve",
    "random_logit_distance",
]


def spearman_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Spearman rank correlation of flattened maps; undefined when either
    map is constant."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if np.std(a) == 0 or np.std(b) == 0:
        return UNDEFINED
    return float(stats.spearmanr(a, b).statistic)


@dataclass(frozen=True)
class RandomizationConfig:
    seed: int = 0
    similarity: Callable = spearman_similarity


def model_parameter_randomization_curve(model, explainer, image, target, cfg):
    """Similarity between the original explanation and the explanation of a
    model with its top k layers cumulatively re-randomized, for k = 1..L."""
    image = check_image(image)
    base = explainer.explain(model, image, target, seed=cfg.seed)
    values = []
    grid = []
    num_layers = model.num_layers
    for k in range(1, num_layers + 1):
        derived = int(np.random.default_rng([cfg.seed, k]).integers(2**31))
        randomized = model.randomize_top(k, derived)
        e = explainer.explain(randomized, image, target, seed=cfg.seed)
        values.append(cfg.similarity(base, e))
        grid.append(k / num_layers)
    return np.asarray(values), np.asarray(grid)


def random_logit_distance(model, explainer, image, target, cfg) -> float:
    """1 - similarity between the explanations of the predicted class and a
    random other class, clipped to [0, 2]."""
    image = check_image(image)
    if model.num_classes < 2:
        raise ValueError("random logit test needs at least 2 classes")
    rng = np.random.default_rng(cfg.seed)
    others = [c for c in range(model.num_classes) if c != target]
    off_class = int(others[rng.integers(len(others))])
    e_target = explainer.explain(model, image, target, seed=cfg.seed)
    e_other = explainer.explain(model, image, off_class, seed=cfg.seed)
    sim = cfg.similarity(e_target, e_other)
    if is_undefined(sim):
        return UNDEFINED
    return float(np.clip(1.0 - sim, 0.0, 2.0))
