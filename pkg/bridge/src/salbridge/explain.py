"""Gradient-family explainers for the hosted model.

All functions return an H x W numpy map matching the input spatial size;
CAM maps are upsampled on this side so the harness never has to care about
feature-map geometry.
"""

from __future__ import annotations

import numpy as np
import torch
from torch.nn import functional as F

from .model import ManagedModel

EXPLAINER_PARAMS = {
    "gradient": {},
    "integrated_gradients": {"steps": 50},
    "smoothgrad": {"samples": 50, "sigma": 0.1},
    "grad_cam": {"layer": "conv2"},
}


def _input_gradient(model: ManagedModel, x: torch.Tensor, target: int):
    x = x.clone().requires_grad_(True)
    logits = model.net(x)
    logits[0, target].backward()
    return x.grad[0]


def gradient(model: ManagedModel, image: np.ndarray, target: int, seed: int):
    x = torch.as_tensor(image, dtype=torch.float32)[None]
    grad = _input_gradient(model, x, target)
    return grad.abs().sum(dim=0).numpy()


def integrated_gradients(model, image, target, seed, steps=50):
    """Riemann-sum path integral from the zero baseline."""
    x = torch.as_tensor(image, dtype=torch.float32)[None]
    total = torch.zeros_like(x[0])
    for i in range(1, steps + 1):
        total += _input_gradient(model, x * (i / steps), target)
    attribution = x[0] * total / steps
    return attribution.abs().sum(dim=0).numpy()


def smoothgrad(model, image, target, seed, samples=50, sigma=0.1):
    x = torch.as_tensor(image, dtype=torch.float32)[None]
    gen = torch.Generator().manual_seed(seed)
    total = torch.zeros_like(x[0])
    for _ in range(samples):
        noise = torch.randn(x.shape, generator=gen) * sigma
        total += _input_gradient(model, x + noise, target)
    return (total / samples).abs().sum(dim=0).numpy()


def grad_cam(model, image, target, seed):
    """Channel-weighted feature maps of the last conv block, ReLU'd and
    bilinearly upsampled to the input size."""
    x = torch.as_tensor(image, dtype=torch.float32)[None]
    acts: list[torch.Tensor] = []
    grads: list[torch.Tensor] = []

    def fwd_hook(module, inputs, output):
        acts.append(output)
        output.register_hook(grads.append)

    handle = model.net.cam_layer.register_forward_hook(fwd_hook)
    try:
        logits = model.net(x)
        logits[0, target].backward()
    finally:
        handle.remove()
    weights = grads[0].mean(dim=(2, 3), keepdim=True)
    cam = F.relu((weights * acts[0]).sum(dim=1, keepdim=True))
    _, h, w = model.input_shape
    cam = F.interpolate(cam, size=(h, w), mode="bilinear", align_corners=False)
    return cam[0, 0].detach().numpy()


EXPLAINERS = {
    "gradient": gradient,
    "integrated_gradients": integrated_gradients,
    "smoothgrad": smoothgrad,
    "grad_cam": grad_cam,
}


def explain(model: ManagedModel, method: str, image: np.ndarray, target: int,
            seed: int) -> np.ndarray:
    if method not in EXPLAINERS:
        raise KeyError(
            f"unknown method {method!r}; available: {sorted(EXPLAINERS)}"
        )
    return np.asarray(EXPLAINERS[method](model, image, target, seed))
