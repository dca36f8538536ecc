"""Kruskal-Wallis H test with a self-contained chi-squared survival function."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

_EPS = 1e-16
_MAX_ITER = 10_000
_TINY = 1e-300


class DegenerateInputError(ValueError):
    """All observations are tied, so the tie correction is zero."""


@dataclass(frozen=True)
class KWResult:
    statistic: float
    degrees_of_freedom: int
    p_value: float
    tie_corrected: bool


def _gamma_p_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by its power series."""
    if x == 0:
        return 0.0
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by modified Lentz continued fraction."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b if b != 0 else 1.0 / _TINY
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gamma_q(a: float, x: float) -> float:
    if a <= 0:
        raise ValueError("shape must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_cf(a, x)


def chi2_sf(x: float, df: int) -> float:
    """Survival function of the chi-squared distribution."""
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    if x <= 0:
        return 1.0
    return gamma_q(df / 2.0, x / 2.0)


def rank_with_ties(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """1-based average ranks and the sizes of every tie group."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    boundaries = np.flatnonzero(np.diff(sorted_vals)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [values.size]))
    sizes = ends - starts
    avg = (starts + ends + 1) / 2.0
    ranks = np.empty(values.size)
    ranks[order] = np.repeat(avg, sizes)
    return ranks, sizes


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> KWResult:
    """H statistic with tie correction; p from the chi-squared tail with ``len(groups) - 1`` df."""
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    arrays = [np.asarray(g, dtype=float).ravel() for g in groups]
    if any(a.size == 0 for a in arrays):
        raise ValueError("every group must be non-empty")
    pooled = np.concatenate(arrays)
    n = pooled.size
    ranks, ties = rank_with_ties(pooled)
    correction = 1.0 - float(np.sum(ties.astype(float) ** 3 - ties)) / (n**3 - n)
    if correction <= 0:
        raise DegenerateInputError("all observations are identical")
    h = 0.0
    start = 0
    for a in arrays:
        r = ranks[start : start + a.size]
        h += r.sum() ** 2 / a.size
        start += a.size
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    h = max(h / correction, 0.0)
    df = len(arrays) - 1
    return KWResult(float(h), df, float(chi2_sf(h, df)), bool(np.any(ties > 1)))


def kruskal_wallis_counts(count_vectors: Sequence[Sequence[float]]) -> KWResult:
    """Kruskal-Wallis on samples given as per-level frequency vectors.

    Each vector holds the number of observations at levels ``1..d``;
    equivalent to expanding into per-observation level values but O(d).
    """
    counts = [np.asarray(c, dtype=float) for c in count_vectors]
    if len(counts) < 2:
        raise ValueError("need at least two groups")
    d = counts[0].size
    if any(c.size != d for c in counts):
        raise ValueError("count vectors must share the number of levels")
    if any(np.any(c < 0) for c in counts):
        raise ValueError("counts must be non-negative")
    sizes = np.array([c.sum() for c in counts])
    if np.any(sizes == 0):
        raise ValueError("every group must be non-empty")
    pooled = np.sum(counts, axis=0)
    n = pooled.sum()
    cum = np.cumsum(pooled) - pooled
    level_rank = cum + (pooled + 1) / 2.0
    tie = float(np.sum(pooled**3 - pooled))
    correction = 1.0 - tie / (n**3 - n)
    if correction <= 0:
        raise DegenerateInputError("all observations are identical")
    h = sum(float(c @ level_rank) ** 2 / s for c, s in zip(counts, sizes))
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    h = max(h / correction, 0.0)
    df = len(counts) - 1
    return KWResult(float(h), df, float(chi2_sf(h, df)), bool(np.any(pooled > 1)))
