"""Adaptive w-event budget division over an infinite release stream.

Four methods decide, per timestamp, whether a user publishes a freshly
perturbed vector or re-releases the last publication:

* LBU spends ``eps / w`` on every timestamp.
* LSP spends the whole ``eps`` on one sampling timestamp per block of ``w``.
* LBD spends ``eps / (2w)`` on a private dissimilarity check and half the
  remaining publication budget of the window on a candidate.
* LBA hands out ``eps / (2w)`` publication slots uniformly, lets a
  publication absorb slots left unused by skipped timestamps, and nullifies
  as many following timestamps as it borrowed.

Timestamps are 1-based. Budgets for timestamps never seen count as zero.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .quantizer import EncodedVector

PerturbFn = Callable[[EncodedVector, float], EncodedVector]
DecideFn = Callable[[float, float], bool]


class SchedulerKind(str, enum.Enum):
    LBU = "LBU"
    LSP = "LSP"
    LBD = "LBD"
    LBA = "LBA"


class Strategy(str, enum.Enum):
    PUBLISH = "publish"
    APPROXIMATE = "approximate"


def dissimilarity(v1: EncodedVector, v2: EncodedVector, form: str = "squared") -> float:
    """Mean per-position difference over the full combined length ``m``.

    ``form`` is ``"squared"`` or ``"absolute"``. On 0/1 vectors both give the
    Hamming distance divided by ``m``.
    """
    if len(v1) != len(v2):
        raise ValueError(f"length mismatch: {len(v1)} vs {len(v2)}")
    diff = v1.bits.astype(np.int16) - v2.bits.astype(np.int16)
    if form == "squared":
        return float(np.mean(diff * diff))
    if form == "absolute":
        return float(np.mean(np.abs(diff)))
    raise ValueError(f"unknown dissimilarity form {form!r}")


@dataclass
class LedgerEntry:
    timestamp: int
    dissimilarity_budget: float
    publication_budget: float


@dataclass
class WindowLedger:
    """Budget records for the last ``w`` timestamps of one user's stream."""

    epsilon: float
    window_size: int
    entries: deque = field(default_factory=deque)
    last_publication_timestamp: int = 0
    last_publication_budget: float = 0.0
    # publication slots of eps/(2w) absorbed by the last LBA publication
    last_publication_slots: int = 0
    last_release: Optional[EncodedVector] = None
    last_release_epsilon: float = math.inf
    last_timestamp: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.window_size < 1:
            raise ValueError(f"window size must be >= 1, got {self.window_size}")

    def record(self, t: int, eps1: float, eps2: float) -> None:
        if t <= self.last_timestamp:
            raise ValueError(f"timestamp {t} not after last recorded {self.last_timestamp}")
        self.entries.append(LedgerEntry(t, eps1, eps2))
        self.last_timestamp = t
        while self.entries and self.entries[0].timestamp < t - self.window_size + 1:
            self.entries.popleft()

    def publication_sum(self, start: int, end: int) -> float:
        return sum(e.publication_budget for e in self.entries if start <= e.timestamp <= end)

    def dissimilarity_sum(self, start: int, end: int) -> float:
        return sum(e.dissimilarity_budget for e in self.entries if start <= e.timestamp <= end)


def window_spent(ledger: WindowLedger, t: int, w: int | None = None) -> float:
    """Total budget spent over ``[t - w + 1, t]``."""
    w = ledger.window_size if w is None else w
    lo = t - w + 1
    return sum(
        e.dissimilarity_budget + e.publication_budget
        for e in ledger.entries
        if lo <= e.timestamp <= t
    )


@dataclass
class SchedulerDecision:
    strategy: Strategy
    candidate: EncodedVector
    # epsilon of the mechanism that produced ``candidate``
    release_budget: float
    dissimilarity_budget: float
    publication_budget: float
    nullified: bool = False


def _default_decide(dis: float, err: float) -> bool:
    return dis > err


def _publish(ledger: WindowLedger, t: int, eps1: float, eps2: float, vec: EncodedVector) -> SchedulerDecision:
    ledger.record(t, eps1, eps2)
    ledger.last_release = vec
    ledger.last_release_epsilon = eps2
    return SchedulerDecision(Strategy.PUBLISH, vec, eps2, eps1, eps2)


def _approximate(ledger: WindowLedger, t: int, eps1: float, nullified: bool = False) -> SchedulerDecision:
    ledger.record(t, eps1, 0.0)
    return SchedulerDecision(
        Strategy.APPROXIMATE,
        ledger.last_release,
        ledger.last_release_epsilon,
        eps1,
        0.0,
        nullified=nullified,
    )


def lbu_step(ledger: WindowLedger, c_t: EncodedVector, t: int, perturb_fn: PerturbFn) -> SchedulerDecision:
    eps = ledger.epsilon / ledger.window_size
    return _publish(ledger, t, 0.0, eps, perturb_fn(c_t, eps))


def lsp_is_sampling(t: int, w: int, phase: int = 0) -> bool:
    """Sampling timestamps are ``phase + 1, phase + 1 + w, ...``."""
    return t > phase and (t - 1 - phase) % w == 0


def lsp_step(
    ledger: WindowLedger,
    c_t: EncodedVector,
    t: int,
    perturb_fn: PerturbFn,
    phase: int = 0,
) -> SchedulerDecision:
    if lsp_is_sampling(t, ledger.window_size, phase):
        return _publish(ledger, t, 0.0, ledger.epsilon, perturb_fn(c_t, ledger.epsilon))
    if ledger.last_release is None:
        # before the first sampling timestamp only the all-zero initial vector exists
        ledger.last_release = EncodedVector(
            np.zeros(len(c_t), dtype=np.uint8), c_t.appliance_count, c_t.level_count
        )
        ledger.last_release_epsilon = math.inf
    return _approximate(ledger, t, 0.0)


def _dissimilarity_phase(
    ledger: WindowLedger, c_t: EncodedVector, perturb_fn: PerturbFn, form: str
) -> tuple[float, float | None]:
    eps1 = ledger.epsilon / (2 * ledger.window_size)
    noisy = perturb_fn(c_t, eps1)
    if ledger.last_release is None:
        return eps1, None
    return eps1, dissimilarity(noisy, ledger.last_release, form)


def lbd_step(
    ledger: WindowLedger,
    c_t: EncodedVector,
    t: int,
    perturb_fn: PerturbFn,
    form: str = "squared",
    decide: DecideFn = _default_decide,
) -> SchedulerDecision:
    w = ledger.window_size
    eps1, dis = _dissimilarity_phase(ledger, c_t, perturb_fn, form)
    remaining = ledger.epsilon / 2 - ledger.publication_sum(t - w + 1, t - 1)
    eps2 = remaining / 2
    candidate = perturb_fn(c_t, eps2)
    if dis is None:
        return _publish(ledger, t, eps1, eps2, candidate)
    err = dissimilarity(candidate, c_t, form)
    if decide(dis, err):
        return _publish(ledger, t, eps1, eps2, candidate)
    return _approximate(ledger, t, eps1)


def lba_nullified_count(ledger: WindowLedger) -> int:
    """Timestamps after the last publication forced to skip (never negative)."""
    return max(ledger.last_publication_slots - 1, 0)


def lba_step(
    ledger: WindowLedger,
    c_t: EncodedVector,
    t: int,
    perturb_fn: PerturbFn,
    form: str = "squared",
    decide: DecideFn = _default_decide,
) -> SchedulerDecision:
    w = ledger.window_size
    unit = ledger.epsilon / (2 * w)
    eps1, dis = _dissimilarity_phase(ledger, c_t, perturb_fn, form)
    l = ledger.last_publication_timestamp
    t_n = lba_nullified_count(ledger)
    if ledger.last_release is not None and t - l <= t_n:
        return _approximate(ledger, t, eps1, nullified=True)
    slots = min(t - (l + t_n), w)
    eps2 = unit * slots
    candidate = perturb_fn(c_t, eps2)
    if dis is not None:
        err = dissimilarity(candidate, c_t, form)
        if not decide(dis, err):
            return _approximate(ledger, t, eps1)
    ledger.last_publication_timestamp = t
    ledger.last_publication_budget = eps2
    ledger.last_publication_slots = slots
    return _publish(ledger, t, eps1, eps2, candidate)


def step(
    kind: SchedulerKind,
    ledger: WindowLedger,
    c_t: EncodedVector,
    t: int,
    perturb_fn: PerturbFn,
    *,
    form: str = "squared",
    lsp_phase: int = 0,
    decide: DecideFn = _default_decide,
) -> SchedulerDecision:
    """Dispatch one timestamp to the configured method."""
    kind = SchedulerKind(kind)
    if kind is SchedulerKind.LBU:
        return lbu_step(ledger, c_t, t, perturb_fn)
    if kind is SchedulerKind.LSP:
        return lsp_step(ledger, c_t, t, perturb_fn, phase=lsp_phase)
    if kind is SchedulerKind.LBD:
        return lbd_step(ledger, c_t, t, perturb_fn, form=form, decide=decide)
    return lba_step(ledger, c_t, t, perturb_fn, form=form, decide=decide)
