"""Hosted model: a small seeded CNN with named layers ordered top-down so
layer randomization can peel parameters off from the output end."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn


class TinyConvNet(nn.Module):
    """Two conv blocks and two fully connected layers; deliberately small
    so gradient explainers run in milliseconds on CPU."""

    def __init__(self, input_shape: tuple[int, int, int], num_classes: int):
        super().__init__()
        c, h, w = input_shape
        self.input_shape = (c, h, w)
        self.num_classes = num_classes
        self.conv1 = nn.Conv2d(c, 8, kernel_size=3, padding=1)
        self.conv2 = nn.Conv2d(8, 16, kernel_size=3, padding=1)
        self.pool = nn.MaxPool2d(2)
        flat = 16 * (h // 4) * (w // 4)
        self.fc1 = nn.Linear(flat, 32)
        self.fc2 = nn.Linear(32, num_classes)
        self.relu = nn.ReLU()
        self._activations: torch.Tensor | None = None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.pool(self.relu(self.conv1(x)))
        x = self.relu(self.conv2(x))
        self._activations = x  # pre-pool feature maps for CAM methods
        x = self.pool(x)
        x = torch.flatten(x, 1)
        x = self.relu(self.fc1(x))
        return self.fc2(x)

    # Layers in top-down order: the module listed first is randomized first.
    def layer_stack(self) -> list[nn.Module]:
        return [self.fc2, self.fc1, self.conv2, self.conv1]

    @property
    def cam_layer(self) -> nn.Module:
        return self.conv2

    def last_activations(self) -> torch.Tensor:
        if self._activations is None:
            raise RuntimeError("forward() has not been called yet")
        return self._activations


class ManagedModel:
    """A model plus its pristine weights and the randomization state machine.

    ``randomize(k, seed)`` always starts from the pristine weights, so the
    call is idempotent per (k, seed) and ``reset()`` restores the exact
    initial state.
    """

    def __init__(self, net: TinyConvNet):
        self.net = net.eval()
        self._pristine = {k: v.clone() for k, v in net.state_dict().items()}

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return self.net.input_shape

    @property
    def num_classes(self) -> int:
        return self.net.num_classes

    @property
    def num_layers(self) -> int:
        return len(self.net.layer_stack())

    def predict(self, images: np.ndarray) -> np.ndarray:
        """Softmax probabilities for a batch of images, rows summing to 1."""
        x = torch.as_tensor(images, dtype=torch.float32)
        with torch.no_grad():
            logits = self.net(x)
            probs = torch.softmax(logits, dim=1)
        return probs.numpy()

    def randomize(self, k: int, seed: int) -> None:
        if not 0 <= k <= self.num_layers:
            raise ValueError(
                f"k must be in [0, {self.num_layers}], got {k}"
            )
        self.reset()
        for i, layer in enumerate(self.net.layer_stack()[:k]):
            gen = torch.Generator().manual_seed(
                (seed * 1000003 + k * 101 + i) % (2**63 - 1)
            )
            with torch.no_grad():
                for param in layer.parameters():
                    param.uniform_(-0.1, 0.1, generator=gen)

    def reset(self) -> None:
        self.net.load_state_dict(self._pristine)


def build_model(
    name: str,
    input_shape: tuple[int, int, int] = (3, 32, 32),
    num_classes: int = 10,
    seed: int = 0,
    weights: str | None = None,
) -> ManagedModel:
    """Construct a named model with a seeded deterministic initialization,
    optionally overridden by a saved state dict."""
    if name != "tinycnn":
        raise ValueError(f"unknown model {name!r}; available: tinycnn")
    torch.manual_seed(seed)
    net = TinyConvNet(tuple(input_shape), num_classes)
    if weights is not None:
        net.load_state_dict(torch.load(weights, weights_only=True))
    return ManagedModel(net)
