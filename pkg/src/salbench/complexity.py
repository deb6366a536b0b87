"""Complexity metrics: how concentrated an attribution map is.

All three operate on absolute attributions, so they are sign- and
positive-scale-invariant.
"""

from __future__ import annotations

import numpy as np

from .sentinel import UNDEFINED
from .tensors import check_map

__all__ = ["sparseness", "complexity", "effective_complexity"]


def sparseness(smap: np.ndarray) -> float:
    """Gini index of the sorted absolute attributions (1 = one-hot)."""
    v = np.sort(np.abs(check_map(smap)).ravel())
    total = v.sum()
    if total == 0:
        return UNDEFINED
    n = v.size
    i = np.arange(1, n + 1)
    return float(((2 * i - n - 1) * v).sum() / (n * total))


def complexity(smap: np.ndarray) -> float:
    """Shannon entropy (nats) of the fractional absolute attributions."""
    a = np.abs(check_map(smap)).ravel()
    total = a.sum()
    if total == 0:
        return UNDEFINED
    p = a[a > 0] / total
    return float(-(p * np.log(p)).sum())


def effective_complexity(smap: np.ndarray, epsilon: float = 0.1) -> int:
    """Count of attributions exceeding ``epsilon`` after peak normalization."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    a = np.abs(check_map(smap)).ravel()
    peak = a.max()
    if peak == 0:
        return 0
    return int(np.count_nonzero(a / peak > epsilon))
