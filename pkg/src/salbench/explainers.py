"""Explainer implementations: RISE (black-box) and the three dummy methods
used as reliability probes, plus a loader for precomputed map files."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import ndimage

from . import smapio
from .tensors import DimensionError, bilinear_resize, check_image

__all__ = [
    "Explainer",
    "RiseConfig",
    "rise_explain",
    "dummy_random",
    "dummy_sobel",
    "dummy_gaussian",
    "load_map_file",
    "make_builtin_explainer",
]


@dataclass(frozen=True)
class Explainer:
    """Named explain capability with behavioral flags used by tests and
    by the metric direction bookkeeping."""

    name: str
    fn: Callable  # (model, image, target, seed) -> H x W map
    input_dependent: bool = True
    model_dependent: bool = True
    class_dependent: bool = True
    deterministic: bool = True

    def explain(self, model, image, target, seed=0) -> np.ndarray:
        return self.fn(model, image, target, seed)


@dataclass(frozen=True)
class RiseConfig:
    num_masks: int = 4000
    grid_size: int = 7
    keep_prob: float = 0.5
    seed: int = 0

    def validate(self, h: int, w: int) -> None:
        if self.num_masks < 1:
            raise ValueError("num_masks must be >= 1")
        if not 2 <= self.grid_size < min(h, w):
            raise ValueError(
                f"grid_size must be in [2, {min(h, w) - 1}], got {self.grid_size}"
            )
        if not 0.0 < self.keep_prob < 1.0:
            raise ValueError("keep_prob must be in (0, 1)")


def _rise_mask(rng: np.random.Generator, h: int, w: int, cfg: RiseConfig) -> np.ndarray:
    s = cfg.grid_size
    cell_h = int(np.ceil(h / s))
    cell_w = int(np.ceil(w / s))
    grid = (rng.random((s, s)) < cfg.keep_prob).astype(np.float64)
    up = bilinear_resize(grid, (s + 1) * cell_h, (s + 1) * cell_w)
    dy = rng.integers(0, cell_h)
    dx = rng.integers(0, cell_w)
    return up[dy : dy + h, dx : dx + w]


def rise_explain(model, image: np.ndarray, target: int, cfg: RiseConfig) -> np.ndarray:
    """Score-weighted mean of random upsampled occlusion masks."""
    image = check_image(image)
    _, h, w = image.shape
    cfg.validate(h, w)
    if not 0 <= target < model.num_classes:
        raise ValueError(f"target class {target} out of range")
    rng = np.random.default_rng(cfg.seed)
    acc = np.zeros((h, w))
    for _ in range(cfg.num_masks):
        mask = _rise_mask(rng, h, w, cfg)
        score = model.predict(image * mask[None, :, :])[target]
        acc += score * mask
    return acc / (cfg.num_masks * cfg.keep_prob)


def dummy_random(image: np.ndarray, seed: int) -> np.ndarray:
    """Per-pixel i.i.d. U[0,1) noise; depends on nothing but the seed."""
    image = check_image(image)
    _, h, w = image.shape
    return np.random.default_rng(seed).random((h, w))


def dummy_sobel(image: np.ndarray) -> np.ndarray:
    """Sobel gradient magnitude of the channel-mean grayscale image."""
    image = check_image(image)
    _, h, w = image.shape
    if h < 3 or w < 3:
        raise DimensionError("sobel needs at least a 3x3 image")
    gray = image.mean(axis=0)
    gx = ndimage.sobel(gray, axis=1, mode="nearest")
    gy = ndimage.sobel(gray, axis=0, mode="nearest")
    return np.sqrt(gx**2 + gy**2)


def dummy_gaussian(image: np.ndarray) -> np.ndarray:
    """Fixed centered Gaussian bump over pixel centers mapped to [-1,1]^2."""
    image = check_image(image)
    _, h, w = image.shape
    v = 2.0 * (np.arange(h) + 0.5) / h - 1.0
    u = 2.0 * (np.arange(w) + 0.5) / w - 1.0
    return np.exp(-(v[:, None] ** 2 + u[None, :] ** 2) / 2.0)


def load_map_file(path: str | Path) -> np.ndarray:
    return smapio.load_map(path)


def make_builtin_explainer(name: str, rise_cfg: RiseConfig | None = None) -> Explainer:
    """Build one of the native explainers by registry name."""
    if name == "random":
        return Explainer(
            "random",
            lambda model, image, target, seed: dummy_random(image, seed),
            input_dependent=False,
            model_dependent=False,
            class_dependent=False,
            deterministic=True,
        )
    if name == "sobel":
        return Explainer(
            "sobel",
            lambda model, image, target, seed: dummy_sobel(image),
            model_dependent=False,
            class_dependent=False,
        )
    if name == "gaussian":
        return Explainer(
            "gaussian",
            lambda model, image, target, seed: dummy_gaussian(image),
            input_dependent=False,
            model_dependent=False,
            class_dependent=False,
        )
    if name == "rise":
        base = rise_cfg or RiseConfig()

        def _rise(model, image, target, seed):
            cfg = RiseConfig(base.num_masks, base.grid_size, base.keep_prob, seed)
            return rise_explain(model, image, target, cfg)

        return Explainer("rise", _rise, deterministic=True)
    if name == "ground_truth":
        return Explainer(
            "ground_truth",
            lambda model, image, target, seed: model.ground_truth_map(image),
            class_dependent=False,
        )
    raise KeyError(f"unknown builtin explainer: {name}")
