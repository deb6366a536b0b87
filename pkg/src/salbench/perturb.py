"""Feature-removal (baseline replacement) and neighborhood sampling.

Images live in normalized [0, 1] space, so black = 0.0 and white = 1.0.
The "uniform" baseline draws one value per replaced region between that
region's pre-replacement minimum and maximum; "random" draws i.i.d. values
in [0, 1) per replaced element.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import check_image

BASELINE_KINDS = ("black", "white", "random", "uniform")


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    seed: int = 0

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ValueError(
                f"baseline kind must be one of {BASELINE_KINDS}, got {self.kind!r}"
            )

    def make_rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def apply_baseline(
    image: np.ndarray,
    indices: np.ndarray,
    spec: BaselineSpec,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Replace the given flat pixel indices (all channels) with the baseline.

    ``indices`` is treated as one region: the uniform kind draws a single
    scalar for the whole call.  ``rng`` carries the call-sequence state for
    the seeded kinds; it defaults to a fresh generator from ``spec.seed``.
    """
    image = check_image(image)
    c, h, w = image.shape
    indices = np.asarray(indices, dtype=np.int64).ravel()
    if indices.size == 0:
        return image.copy()
    if indices.min() < 0 or indices.max() >= h * w:
        raise ValueError("baseline replacement index out of range")
    out = image.copy()
    flat = out.reshape(c, h * w)
    if spec.kind == "black":
        flat[:, indices] = 0.0
    elif spec.kind == "white":
        flat[:, indices] = 1.0
    elif spec.kind == "random":
        rng = rng if rng is not None else spec.make_rng()
        flat[:, indices] = rng.random((c, indices.size))
    else:  # uniform
        rng = rng if rng is not None else spec.make_rng()
        region = image.reshape(c, h * w)[:, indices]
        flat[:, indices] = rng.uniform(region.min(), region.max())
    return out


@dataclass(frozen=True)
class PerturbationPlan:
    """Removal schedule: how many features/patches go at each step."""

    schedule: tuple[int, ...]

    def __post_init__(self):
        if len(self.schedule) < 1 or any(s < 1 for s in self.schedule):
            raise ValueError("schedule must contain positive step sizes")

    @property
    def steps(self) -> int:
        return len(self.schedule)

    @property
    def total(self) -> int:
        return int(sum(self.schedule))


def default_plan(n_features: int, steps: int | None = None) -> PerturbationPlan:
    """Equal chunks with the remainder folded into the last step.

    Defaults to one step per image row (min(n, sqrt-ish) heuristic matching
    a 224-step schedule on 224x224 inputs).
    """
    if steps is None:
        steps = min(n_features, int(round(np.sqrt(n_features))))
    steps = max(1, min(steps, n_features))
    chunk = n_features // steps
    schedule = [chunk] * steps
    schedule[-1] += n_features - chunk * steps
    return PerturbationPlan(tuple(schedule))


def sample_neighborhood(
    image: np.ndarray, radius: float, count: int, seed: int
) -> list[np.ndarray]:
    """``count`` copies of the image with elementwise U[-radius, radius] noise."""
    image = check_image(image)
    if radius <= 0:
        raise ValueError("radius must be positive")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    return [
        image + rng.uniform(-radius, radius, size=image.shape) for _ in range(count)
    ]
