"""Aggregation and meta-evaluation statistics: trapezoidal AUC, Kendall
tau-b with tie correction, permutation p-values, Holm step-down correction,
score matrices, rank tables and the pairwise metric correlation report."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .sentinel import UNDEFINED, is_undefined

__all__ = [
    "auc",
    "kendall_tau_b",
    "kendall_p_value",
    "holm_bonferroni",
    "concordance_percentage",
    "ScoreMatrix",
    "build_score_matrix",
    "RankTable",
    "rank_methods",
    "CorrelationReport",
    "correlate_metrics",
]


def auc(values: np.ndarray, grid: np.ndarray) -> float:
    """Trapezoidal area of a curve over its normalized x-grid."""
    values = np.asarray(values, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    if values.size < 2 or values.shape != grid.shape:
        raise ValueError("curve needs at least 2 matching points")
    if np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > 1:
        raise ValueError("x-grid must be strictly increasing within [0, 1]")
    return float(np.trapezoid(values, grid))


def kendall_tau_b(x, y) -> float:
    """Tau-b: (p - q) / sqrt((p+q+t)(p+q+u)) with p/q concordant and
    discordant pair counts and t/u the single-vector tie counts."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("inputs must be equal-length vectors of size >= 2")
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(x.size, k=1)
    dx, dy = dx[iu], dy[iu]
    prod = dx * dy
    p = int(np.count_nonzero(prod > 0))
    q = int(np.count_nonzero(prod < 0))
    t = int(np.count_nonzero((dx == 0) & (dy != 0)))
    u = int(np.count_nonzero((dy == 0) & (dx != 0)))
    denom = math.sqrt((p + q + t) * (p + q + u))
    if denom == 0:
        return UNDEFINED
    return (p - q) / denom


def kendall_p_value(x, y, trials: int = 100_000, seed: int = 0) -> float:
    """Two-sided permutation p-value for tau-b.

    Exact enumeration of all n! permutations for n <= 7, otherwise a
    seeded Monte Carlo estimate over ``trials`` permutations plus the
    identity.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    observed = kendall_tau_b(x, y)
    if is_undefined(observed):
        return UNDEFINED
    threshold = abs(observed) - 1e-12
    n = x.size
    if n <= 7:
        count = 0
        total = 0
        for perm in itertools.permutations(range(n)):
            tau = kendall_tau_b(x, y[list(perm)])
            total += 1
            if not is_undefined(tau) and abs(tau) >= threshold:
                count += 1
        return count / total
    rng = np.random.default_rng(seed)
    count = 1  # the identity permutation is always at least as extreme
    for _ in range(trials):
        tau = kendall_tau_b(x, rng.permutation(y))
        if not is_undefined(tau) and abs(tau) >= threshold:
            count += 1
    return count / (trials + 1)


def holm_bonferroni(pvals, alpha: float = 0.05) -> np.ndarray:
    """Step-down rejection mask at family-wise level ``alpha``, returned in
    the original order.  NaN p-values are never rejected."""
    pvals = np.asarray(pvals, dtype=np.float64)
    m = np.count_nonzero(~np.isnan(pvals))
    mask = np.zeros(pvals.size, dtype=bool)
    order = np.argsort(np.where(np.isnan(pvals), np.inf, pvals))
    for i, idx in enumerate(order[:m]):
        if pvals[idx] <= alpha / (m - i):
            mask[idx] = True
        else:
            break
    return mask


def concordance_percentage(tau: float) -> float:
    """Fraction of concordant pairs implied by tau under the no-ties
    hypothesis: (tau + 1) / 2."""
    if not -1.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [-1, 1]")
    return (tau + 1.0) / 2.0


@dataclass
class ScoreMatrix:
    methods: list[str]
    columns: list[str]  # metric-instance labels, e.g. "pixel_flipping/black"
    values: np.ndarray  # methods x columns means
    exclusions: np.ndarray  # methods x columns sentinel counts
    image_count: int


def build_score_matrix(per_image_scores, methods, columns, image_count) -> ScoreMatrix:
    """Mean per (method, metric-instance) over included (non-sentinel)
    per-image scores.

    ``per_image_scores[(method, column)]`` is a length-image_count array
    that may contain sentinels.
    """
    values = np.empty((len(methods), len(columns)))
    exclusions = np.zeros((len(methods), len(columns)), dtype=int)
    for i, method in enumerate(methods):
        for j, column in enumerate(columns):
            scores = np.asarray(per_image_scores[(method, column)], dtype=np.float64)
            ok = ~np.isnan(scores)
            if not ok.any():
                raise ValueError(f"no included scores for cell ({method}, {column})")
            values[i, j] = scores[ok].mean()
            exclusions[i, j] = int(np.count_nonzero(~ok))
    return ScoreMatrix(list(methods), list(columns), values, exclusions, image_count)


@dataclass
class RankTable:
    methods: list[str]
    per_image: np.ndarray  # included images x methods, midranks (1 = best)
    average: np.ndarray  # per-method mean rank
    excluded_images: int


def rank_methods(scores: np.ndarray, methods, higher_better: bool) -> RankTable:
    """Per-image midrank ranking of methods (rank 1 best) and its average.

    ``scores`` is images x methods; images where any method has a sentinel
    score are excluded and counted.
    """
    scores = np.asarray(scores, dtype=np.float64)
    ok = ~np.isnan(scores).any(axis=1)
    included = scores[ok]
    if included.shape[0] == 0:
        raise ValueError("no image has a full set of scores to rank")
    signed = -included if higher_better else included
    ranks = np.vstack([sps.rankdata(row, method="average") for row in signed])
    return RankTable(
        list(methods), ranks, ranks.mean(axis=0), int(np.count_nonzero(~ok))
    )


@dataclass
class CorrelationReport:
    columns: list[str]
    tau: np.ndarray
    pvals: np.ndarray
    alpha: float
    full_mask: np.ndarray  # Holm over every valid column pair
    group_masks: dict[str, np.ndarray] = field(default_factory=dict)
    groups: dict[str, list[int]] = field(default_factory=dict)


def _pairs_mask(tau, pvals, pair_list, alpha):
    """Holm over the listed (i, j) pairs; returns a symmetric bool matrix."""
    k = tau.shape[0]
    ps = np.array([pvals[i, j] for i, j in pair_list])
    rejected = holm_bonferroni(ps, alpha)
    mask = np.zeros((k, k), dtype=bool)
    for (i, j), r in zip(pair_list, rejected):
        mask[i, j] = mask[j, i] = bool(r)
    return mask


def correlate_metrics(
    matrix: ScoreMatrix,
    groups: dict[str, list[int]] | None = None,
    alpha: float = 0.05,
    p_trials: int = 100_000,
    p_seed: int = 0,
) -> CorrelationReport:
    """Pairwise tau-b between metric-instance columns with Holm correction
    applied both over the full pair set and within each group sub-matrix."""
    if matrix.values.shape[0] < 3:
        raise ValueError("metric correlation needs at least 3 methods")
    k = len(matrix.columns)
    tau = np.eye(k)
    pvals = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            t = kendall_tau_b(matrix.values[:, i], matrix.values[:, j])
            tau[i, j] = tau[j, i] = t
            if is_undefined(t):
                pvals[i, j] = pvals[j, i] = UNDEFINED
            else:
                p = kendall_p_value(
                    matrix.values[:, i], matrix.values[:, j],
                    trials=p_trials, seed=p_seed,
                )
                pvals[i, j] = pvals[j, i] = p
    all_pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    full_mask = _pairs_mask(tau, pvals, all_pairs, alpha)
    group_masks = {}
    groups = groups or {}
    for name, cols in groups.items():
        pair_list = [
            (i, j) for i in cols for j in cols if i < j
        ]
        if pair_list:
            group_masks[name] = _pairs_mask(tau, pvals, pair_list, alpha)
    return CorrelationReport(
        list(matrix.columns), tau, pvals, alpha, full_mask, group_masks, dict(groups)
    )
