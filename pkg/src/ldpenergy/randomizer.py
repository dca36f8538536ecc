"""Optimized unary encoding perturbation of the combined appliance vector.

Two valid encodings of ``n`` appliances differ in at most ``2n`` bits, so the
flip probability for a 0 bit is ``q = 1 / (1 + exp(eps / n))`` while a 1 bit
survives with ``p = 1/2``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .quantizer import EncodedVector

MAX_ENUMERATION_BITS = 16


@dataclass(frozen=True)
class PerturbationParams:
    """Per-release OUE parameters.

    ``p`` is the probability a 1 bit stays 1 and ``q`` the probability a 0 bit
    becomes 1. Build these with :func:`oue_probabilities`; direct construction
    is only meant for degenerate test configurations.
    """

    epsilon: float
    appliance_count: int
    p: float
    q: float


def oue_probabilities(epsilon: float, n: int) -> PerturbationParams:
    if n < 1:
        raise ValueError(f"appliance count must be >= 1, got {n}")
    if epsilon < 0 or math.isnan(epsilon):
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    x = epsilon / n
    # logistic form that stays finite for large x
    q = math.exp(-x) / (1.0 + math.exp(-x)) if x > 0 else 0.5
    return PerturbationParams(epsilon=float(epsilon), appliance_count=n, p=0.5, q=q)


def perturb(
    vector: EncodedVector, params: PerturbationParams, rng: np.random.Generator
) -> EncodedVector:
    """Flip each bit independently: 1 stays with prob. ``p``, 0 rises with prob. ``q``."""
    if vector.appliance_count != params.appliance_count:
        raise ValueError(
            f"vector has {vector.appliance_count} appliance blocks, params expect "
            f"{params.appliance_count}"
        )
    u = rng.random(vector.bits.size)
    keep = np.where(vector.bits == 1, params.p, params.q)
    return EncodedVector((u < keep).astype(np.uint8), vector.appliance_count, vector.level_count)


def _bit_log_probs(bits: np.ndarray, params: PerturbationParams) -> tuple[np.ndarray, np.ndarray]:
    """log Pr[out=1 | in] and log Pr[out=0 | in] per position."""
    one = np.where(bits == 1, params.p, params.q)
    with np.errstate(divide="ignore"):
        return np.log(one), np.log1p(-one)


def likelihood_ratio_bound(
    b1: EncodedVector, b2: EncodedVector, params: PerturbationParams
) -> float:
    """Exact ``max_B Pr[B | b1] / Pr[B | b2]`` by enumerating all ``2^m`` outputs."""
    if len(b1) != len(b2):
        raise ValueError("inputs must have equal length")
    m = len(b1)
    if m > MAX_ENUMERATION_BITS:
        raise ValueError(f"m={m} too large for exhaustive enumeration (max {MAX_ENUMERATION_BITS})")
    outputs = np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.uint8)
    l1_one, l1_zero = _bit_log_probs(b1.bits, params)
    l2_one, l2_zero = _bit_log_probs(b2.bits, params)
    log_p1 = np.where(outputs == 1, l1_one, l1_zero).sum(axis=1)
    log_p2 = np.where(outputs == 1, l2_one, l2_zero).sum(axis=1)
    with np.errstate(invalid="ignore"):
        log_ratio = log_p1 - log_p2
    log_ratio = log_ratio[np.isfinite(log_p1)]
    return float(np.exp(log_ratio.max()))


def valid_encodings(n: int, d: int) -> list[EncodedVector]:
    """All ``d**n`` well-formed encodings (one 1 per block)."""
    out = []
    for levels in itertools.product(range(1, d + 1), repeat=n):
        bits = np.zeros((n, d), dtype=np.uint8)
        for i, lv in enumerate(levels):
            bits[i, d - lv] = 1
        out.append(EncodedVector(bits.reshape(-1), n, d))
    return out
