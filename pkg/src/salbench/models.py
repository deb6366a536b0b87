"""Built-in deterministic models.

Two desk-scale models are provided: a planted-evidence logistic classifier
whose exact per-pixel attribution is known in closed form, and a small
fully-connected network with randomizable layers for the randomization
metrics.  Both are pure numpy forward passes, deterministic and
side-effect free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensors import check_image


class ShapeMismatchError(ValueError):
    pass


def _check_input(model, image: np.ndarray) -> np.ndarray:
    image = check_image(image)
    if image.shape != model.input_shape:
        raise ShapeMismatchError(
            f"expected input shape {model.input_shape}, got {image.shape}"
        )
    return image


def sigmoid(z: float) -> float:
    return float(1.0 / (1.0 + np.exp(-z)))


@dataclass(frozen=True, eq=False)
class PlantedEvidenceModel:
    """Binary logistic model whose evidence lives in a known pixel region.

    The logit for class 1 is ``sum_i w_i * xbar_i + b`` over the planted
    region, with ``xbar`` the channel mean of the input.  The ground-truth
    attribution of a pixel is exactly its contribution ``w_i * xbar_i``.
    """

    input_shape: tuple[int, int, int]
    region: np.ndarray  # flat pixel indices into the H*W plane
    weights: np.ndarray  # one weight per region pixel
    bias: float = 0.0
    num_classes: int = 2
    threadsafe: bool = True

    def __post_init__(self):
        region = np.asarray(self.region, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if region.shape != weights.shape:
            raise ValueError("region and weights must have equal length")
        _, h, w = self.input_shape
        if region.size and (region.min() < 0 or region.max() >= h * w):
            raise ValueError("region index out of bounds")
        object.__setattr__(self, "region", region)
        object.__setattr__(self, "weights", weights)

    def _logit(self, image: np.ndarray) -> float:
        xbar = image.mean(axis=0).ravel()
        return float(self.weights @ xbar[self.region] + self.bias)

    def predict(self, image: np.ndarray) -> np.ndarray:
        image = _check_input(self, image)
        p1 = sigmoid(self._logit(image))
        return np.array([1.0 - p1, p1])

    def ground_truth_map(self, image: np.ndarray) -> np.ndarray:
        image = _check_input(self, image)
        _, h, w = self.input_shape
        xbar = image.mean(axis=0).ravel()
        flat = np.zeros(h * w)
        flat[self.region] = self.weights * xbar[self.region]
        return flat.reshape(h, w)


def _init_layer(rng: np.random.Generator, n_in: int, n_out: int):
    scale = 0.1
    w = rng.uniform(-scale, scale, size=(n_out, n_in))
    b = rng.uniform(-scale, scale, size=n_out)
    return w, b


@dataclass(frozen=True, eq=False)
class TinyMLP:
    """Seeded two-hidden-layer ReLU network with softmax output.

    Exposes three randomizable layers (hidden1, hidden2, output) counted
    bottom-up; ``randomize_top(k, seed)`` returns a copy with the top ``k``
    layers redrawn from the same initializer.
    """

    input_shape: tuple[int, int, int]
    num_classes: int = 10
    hidden: int = 32
    seed: int = 0
    layers: tuple = field(default=None)
    threadsafe: bool = True

    def __post_init__(self):
        if self.layers is None:
            n_in = int(np.prod(self.input_shape))
            sizes = [n_in, self.hidden, self.hidden, self.num_classes]
            layers = []
            for i in range(3):
                rng = np.random.default_rng([self.seed, i])
                layers.append(_init_layer(rng, sizes[i], sizes[i + 1]))
            object.__setattr__(self, "layers", tuple(layers))

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def predict(self, image: np.ndarray) -> np.ndarray:
        image = _check_input(self, image)
        a = image.ravel()
        for i, (w, b) in enumerate(self.layers):
            a = w @ a + b
            if i < len(self.layers) - 1:
                a = np.maximum(a, 0.0)
        a = a - a.max()
        e = np.exp(a)
        return e / e.sum()

    def randomize_top(self, k: int, seed: int) -> "TinyMLP":
        if not 0 <= k <= self.num_layers:
            raise ValueError(f"k must be in [0, {self.num_layers}], got {k}")
        n_in = int(np.prod(self.input_shape))
        sizes = [n_in, self.hidden, self.hidden, self.num_classes]
        layers = list(self.layers)
        for i in range(self.num_layers - k, self.num_layers):
            rng = np.random.default_rng([seed, k, i])
            layers[i] = _init_layer(rng, sizes[i], sizes[i + 1])
        return TinyMLP(
            input_shape=self.input_shape,
            num_classes=self.num_classes,
            hidden=self.hidden,
            seed=self.seed,
            layers=tuple(layers),
        )


def make_planted_model(
    shape: tuple[int, int, int],
    seed: int,
    region_size: int | None = None,
    weight_scale: float = 1.0,
    bias: float = 0.0,
) -> PlantedEvidenceModel:
    """Random planted model: a seeded pixel region with positive weights."""
    _, h, w = shape
    n = h * w
    if region_size is None:
        region_size = max(1, n // 8)
    rng = np.random.default_rng([seed, 7])
    region = rng.choice(n, size=region_size, replace=False)
    region.sort()
    weights = rng.uniform(0.5, 1.5, size=region_size) * weight_scale
    return PlantedEvidenceModel(
        input_shape=shape, region=region, weights=weights, bias=bias
    )
