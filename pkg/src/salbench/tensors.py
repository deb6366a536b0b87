"""Dense array helpers shared by every metric: validation, normalization,
feature ordering and a small bilinear resize."""

from __future__ import annotations

import numpy as np

__all__ = [
    "check_image",
    "check_map",
    "normalize_map",
    "descending_order",
    "patch_pixel_indices",
    "num_patches",
    "bilinear_resize",
]


class DimensionError(ValueError):
    """Shapes or patch sizes that do not fit together."""


def check_image(image: np.ndarray) -> np.ndarray:
    """Validate a C x H x W image array and return it as float64."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise DimensionError(f"image must be C x H x W, got shape {image.shape}")
    c, h, w = image.shape
    if c < 1 or h < 2 or w < 2:
        raise DimensionError(f"image too small: shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ValueError("image contains non-finite values")
    return image


def check_map(smap: np.ndarray) -> np.ndarray:
    """Validate an H x W saliency map and return it as float64."""
    smap = np.asarray(smap, dtype=np.float64)
    if smap.ndim != 2:
        raise DimensionError(f"saliency map must be H x W, got shape {smap.shape}")
    if not np.all(np.isfinite(smap)):
        raise ValueError("saliency map contains non-finite values")
    return smap


def normalize_map(smap: np.ndarray) -> np.ndarray:
    """Affinely rescale a map to [0, 1]; a constant map becomes all zeros."""
    smap = check_map(smap)
    lo = smap.min()
    hi = smap.max()
    if hi == lo:
        return np.zeros_like(smap)
    return (smap - lo) / (hi - lo)


def num_patches(h: int, w: int, patch_size: int) -> int:
    if patch_size < 1 or h % patch_size or w % patch_size:
        raise DimensionError(
            f"patch size {patch_size} does not divide map dims {h}x{w}"
        )
    return (h // patch_size) * (w // patch_size)


def patch_pixel_indices(h: int, w: int, patch_size: int, patch_id: int) -> np.ndarray:
    """Flat pixel indices covered by one patch (patches are row-major blocks)."""
    per_row = w // patch_size
    br, bc = divmod(patch_id, per_row)
    rows = np.arange(br * patch_size, (br + 1) * patch_size)
    cols = np.arange(bc * patch_size, (bc + 1) * patch_size)
    return (rows[:, None] * w + cols[None, :]).ravel()


def descending_order(smap: np.ndarray, patch_size: int | None = None) -> np.ndarray:
    """Feature indices sorted by descending absolute attribution.

    With ``patch_size`` the features are non-overlapping square patches
    (scored by the sum of absolute attributions inside each patch) and the
    returned indices are patch ids.  Ties break by ascending index so the
    ordering is deterministic.
    """
    smap = check_map(smap)
    mag = np.abs(smap)
    if patch_size is None or patch_size == 1:
        scores = mag.ravel()
    else:
        h, w = smap.shape
        num_patches(h, w, patch_size)
        per_row = w // patch_size
        blocks = mag.reshape(h // patch_size, patch_size, per_row, patch_size)
        scores = blocks.sum(axis=(1, 3)).ravel()
    # stable sort on the negated scores keeps ascending-index tie-break
    return np.argsort(-scores, kind="stable")


def bilinear_resize(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize a 2-D array with bilinear interpolation (pixel-center aligned)."""
    grid = np.asarray(grid, dtype=np.float64)
    in_h, in_w = grid.shape
    ys = (np.arange(out_h) + 0.5) * in_h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * in_w / out_w - 0.5
    ys = np.clip(ys, 0, in_h - 1)
    xs = np.clip(xs, 0, in_w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = grid[y0][:, x0] * (1 - wx) + grid[y0][:, x1] * wx
    bot = grid[y1][:, x0] * (1 - wx) + grid[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy
