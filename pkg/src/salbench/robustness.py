"""Robustness metrics: stability of explanations under small input
perturbations, estimated with seeded Monte Carlo neighborhoods."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .perturb import sample_neighborhood
from .tensors import check_image

__all__ = [
    "RobustnessConfig",
    "max_sensitivity",
    "avg_sensitivity",
    "local_lipschitz_estimate",
]


@dataclass(frozen=True)
class RobustnessConfig:
    radius: float = 0.02
    samples: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


def _distances(model, explainer, image, target, cfg, with_input_norm=False):
    image = check_image(image)
    base = explainer.explain(model, image, target, seed=cfg.seed).ravel()
    neighbors = sample_neighborhood(image, cfg.radius, cfg.samples, cfg.seed)
    out = []
    for i, x in enumerate(neighbors):
        e = explainer.explain(model, x, target, seed=np.random.default_rng(
            [cfg.seed, i]).integers(2**31)).ravel()
        d = float(np.linalg.norm(e - base))
        if with_input_norm:
            out.append((d, float(np.linalg.norm((x - image).ravel()))))
        else:
            out.append(d)
    return out


def max_sensitivity(model, explainer, image, target, cfg: RobustnessConfig) -> float:
    """Largest explanation displacement over the sampled neighborhood."""
    return max(_distances(model, explainer, image, target, cfg))


def avg_sensitivity(model, explainer, image, target, cfg: RobustnessConfig) -> float:
    """Mean explanation displacement over the sampled neighborhood."""
    d = _distances(model, explainer, image, target, cfg)
    return sum(d) / len(d)


def local_lipschitz_estimate(
    model, explainer, image, target, cfg: RobustnessConfig
) -> float:
    """Max ratio of explanation displacement to input displacement.

    Zero-displacement draws are rejected and redrawn; ``cfg.samples``
    consecutive rejections raise a degenerate-input error.
    """
    image = check_image(image)
    base = explainer.explain(model, image, target, seed=cfg.seed).ravel()
    rng = np.random.default_rng(cfg.seed)
    ratios = []
    attempt = 0
    for i in range(cfg.samples):
        for failure in range(cfg.samples + 1):
            delta = rng.uniform(-cfg.radius, cfg.radius, size=image.shape)
            dn = float(np.linalg.norm(delta.ravel()))
            attempt += 1
            if dn > 0.0:
                break
            if failure + 1 >= cfg.samples:
                raise ValueError("degenerate input: repeated zero perturbations")
        x = image + delta
        e = explainer.explain(
            model, x, target,
            seed=np.random.default_rng([cfg.seed, attempt]).integers(2**31),
        ).ravel()
        ratios.append(float(np.linalg.norm(e - base)) / dn)
    return max(ratios)
