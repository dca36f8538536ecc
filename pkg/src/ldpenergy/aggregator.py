"""Server-side aggregation, frequency estimation and top-k analysis.

Nothing in here accepts raw readings: every estimate is post-processing of
released vectors.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .client import ReleaseRecord
from .quantizer import QuantizationScheme
from .randomizer import PerturbationParams, oue_probabilities

STANDARD = "standard"
PAPER_LITERAL = "paper_literal"


@dataclass
class RoundSums:
    sums: np.ndarray
    user_count: int
    appliance_count: int
    level_count: int

    def merge(self, other: "RoundSums") -> "RoundSums":
        if (self.appliance_count, self.level_count) != (other.appliance_count, other.level_count):
            raise ValueError("cannot merge sums of different dimensions")
        return RoundSums(
            self.sums + other.sums,
            self.user_count + other.user_count,
            self.appliance_count,
            self.level_count,
        )


@dataclass
class EstimatedHistogram:
    """Estimated user counts, ``counts[i, l - 1]`` for appliance ``i + 1`` at level ``l``."""

    timestamp: int
    counts: np.ndarray
    user_count: int

    @property
    def appliance_count(self) -> int:
        return self.counts.shape[0]

    @property
    def level_count(self) -> int:
        return self.counts.shape[1]


def accumulate(records: Sequence[ReleaseRecord]) -> RoundSums:
    """Position-wise bit sums of one round's released vectors."""
    if not records:
        raise ValueError("empty round: no records to accumulate")
    first = records[0].released_vector
    n, d = first.appliance_count, first.level_count
    t = records[0].timestamp
    seen = set()
    sums = np.zeros(n * d, dtype=np.int64)
    for r in records:
        v = r.released_vector
        if (v.appliance_count, v.level_count) != (n, d):
            raise ValueError("records in one round must share (n, d)")
        if r.timestamp != t:
            raise ValueError(f"mixed timestamps {t} and {r.timestamp} in one round")
        if r.user_id in seen:
            raise ValueError(f"duplicate user_id {r.user_id} at timestamp {t}")
        seen.add(r.user_id)
        sums += v.bits
    return RoundSums(sums, len(records), n, d)


def _blocks_to_levels(sums: np.ndarray, n: int, d: int) -> np.ndarray:
    # block index d - l holds level l, so reversing each block gives level order
    return np.asarray(sums, dtype=float).reshape(n, d)[:, ::-1]


def estimate_histogram(
    sums: RoundSums,
    params: PerturbationParams,
    mode: str = STANDARD,
    timestamp: int = 0,
) -> EstimatedHistogram:
    """Invert OUE bit sums into per-bucket user counts.

    ``standard`` uses ``(y - k q) / (p - q)``; ``paper_literal`` uses
    ``(y - d q) / (p - q)``.
    """
    k = sums.user_count
    if k < 1:
        raise ValueError("user count must be >= 1")
    if params.p == params.q:
        raise ValueError("p == q: estimator undefined (epsilon = 0)")
    y = _blocks_to_levels(sums.sums, sums.appliance_count, sums.level_count)
    if mode == STANDARD:
        offset = k * params.q
    elif mode == PAPER_LITERAL:
        offset = sums.level_count * params.q
    else:
        raise ValueError(f"unknown estimator mode {mode!r}")
    return EstimatedHistogram(timestamp, (y - offset) / (params.p - params.q), k)


def accumulate_grouped(records: Sequence[ReleaseRecord]) -> dict[float, RoundSums]:
    """Bit sums per perturbation budget; combine partial results with :func:`merge_grouped`."""
    groups: dict[float, list[ReleaseRecord]] = defaultdict(list)
    for r in records:
        groups[r.vector_epsilon].append(r)
    return {eps: accumulate(g) for eps, g in groups.items()}


def merge_grouped(a: dict[float, RoundSums], b: dict[float, RoundSums]) -> dict[float, RoundSums]:
    out = dict(a)
    for eps, s in b.items():
        out[eps] = out[eps].merge(s) if eps in out else s
    return out


def estimate_grouped(
    grouped: dict[float, RoundSums], mode: str = STANDARD, timestamp: int = 0
) -> EstimatedHistogram:
    """Invert each budget group with its own ``q`` and add the group estimates."""
    if not grouped:
        raise ValueError("empty round: no records to estimate")
    total = None
    k = 0
    for eps in sorted(grouped):
        sums = grouped[eps]
        k += sums.user_count
        if math.isinf(eps):
            # unperturbed initial zero vectors carry no information
            est = np.zeros((sums.appliance_count, sums.level_count))
        else:
            est = estimate_histogram(sums, oue_probabilities(eps, sums.appliance_count), mode).counts
        total = est if total is None else total + est
    return EstimatedHistogram(timestamp, total, k)


def estimate_round(
    records: Sequence[ReleaseRecord], mode: str = STANDARD
) -> EstimatedHistogram:
    """Estimate one round whose records may carry different perturbation budgets."""
    accumulate(records)  # validates the round as a whole
    return estimate_grouped(accumulate_grouped(records), mode, records[0].timestamp)


def true_histogram(levels: np.ndarray, level_count: int, timestamp: int = 0) -> EstimatedHistogram:
    """Exact counts from a ``(users, n)`` array of 1-based levels."""
    levels = np.asarray(levels)
    n = levels.shape[1]
    counts = np.zeros((n, level_count))
    for i in range(n):
        counts[i] = np.bincount(levels[:, i] - 1, minlength=level_count)
    return EstimatedHistogram(timestamp, counts, levels.shape[0])


def estimate_energy(
    histograms: Iterable[EstimatedHistogram], scheme: QuantizationScheme
) -> np.ndarray:
    """Per-appliance energy: sum over time and levels of ``max(c, 0)`` times the range midpoint."""
    mids = scheme.midpoints()
    total = None
    for h in histograms:
        if h.level_count != scheme.level_count:
            raise ValueError(
                f"histogram has {h.level_count} levels, scheme has {scheme.level_count}"
            )
        e = np.clip(h.counts, 0, None) @ mids
        total = e if total is None else total + e
    if total is None:
        raise ValueError("need at least one histogram")
    return total


@dataclass(frozen=True)
class ApplianceRanking:
    """(appliance_id, energy) pairs, descending energy, ties by ascending id."""

    entries: tuple[tuple[int, float], ...]

    @property
    def appliance_ids(self) -> list[int]:
        return [a for a, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def rank_appliances(energies) -> ApplianceRanking:
    e = np.asarray(energies, dtype=float)
    ids = np.arange(1, e.size + 1)
    # lexsort sorts by the last key first
    order = np.lexsort((ids, -e))
    return ApplianceRanking(tuple((int(ids[i]), float(e[i])) for i in order))


def top_k(energies, k: int) -> ApplianceRanking:
    e = np.asarray(energies, dtype=float)
    if k > e.size:
        raise ValueError(f"k={k} exceeds appliance count {e.size}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return ApplianceRanking(rank_appliances(e).entries[:k])


def hit_rate(
    true_ranking: ApplianceRanking, estimated_ranking: ApplianceRanking, k: int
) -> tuple[float, int]:
    """Positions among the first ``k`` naming the same appliance; returns ``(hits / k, hits)``."""
    if k < 1 or k > len(true_ranking) or k > len(estimated_ranking):
        raise ValueError(
            f"k={k} outside 1..min({len(true_ranking)}, {len(estimated_ranking)})"
        )
    a = true_ranking.appliance_ids[:k]
    b = estimated_ranking.appliance_ids[:k]
    hits = sum(x == y for x, y in zip(a, b))
    return hits / k, hits


def impact_shares(energies) -> np.ndarray:
    """Percentage of total energy per appliance."""
    e = np.asarray(energies, dtype=float)
    total = e.sum()
    if not total > 0:
        raise ValueError("impact shares need at least one positive energy")
    return e / total * 100.0
