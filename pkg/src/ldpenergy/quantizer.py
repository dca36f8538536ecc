"""Quantization of per-appliance energy readings into one-hot level blocks.

Readings are mapped to ``d`` half-open ranges ``(b[l-1], b[l]]`` over
``[0, max]``. Zero belongs to level 1 and values above ``max`` clamp to
level ``d``. Each level is one-hot encoded into a block of ``d`` bits where
level ``l`` sits at index ``d - l`` (level 1 is the rightmost bit), and the
blocks of all roster appliances are concatenated into one flat vector.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuantizationScheme:
    """Ordered energy ranges shared by every user in an experiment."""

    boundaries: tuple[float, ...]

    def __post_init__(self):
        b = self.boundaries
        if len(b) < 3:
            raise ValueError(f"need at least 2 levels (3 boundaries), got {len(b)} boundaries")
        if b[0] != 0:
            raise ValueError(f"first boundary must be 0, got {b[0]}")
        if any(not np.isfinite(x) for x in b):
            raise ValueError("boundaries must be finite")
        for i in range(1, len(b)):
            if not b[i] > b[i - 1]:
                raise ValueError(
                    f"boundaries must be strictly increasing; b[{i}]={b[i]} <= b[{i - 1}]={b[i - 1]}"
                )

    @property
    def level_count(self) -> int:
        return len(self.boundaries) - 1

    @property
    def max_energy(self) -> float:
        return self.boundaries[-1]

    def midpoints(self) -> np.ndarray:
        """Range midpoints in watts, indexed by ``level - 1``."""
        b = np.asarray(self.boundaries, dtype=float)
        return (b[:-1] + b[1:]) / 2.0


@dataclass(frozen=True)
class ApplianceReading:
    appliance_id: int
    value: float


class EncodedVector:
    """Flattened bit vector of ``appliance_count`` blocks of ``level_count`` bits."""

    __slots__ = ("bits", "appliance_count", "level_count")

    def __init__(self, bits, appliance_count: int, level_count: int):
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size != appliance_count * level_count:
            raise ValueError(
                f"bit vector length {bits.size} != {appliance_count} x {level_count}"
            )
        self.bits = bits
        self.appliance_count = appliance_count
        self.level_count = level_count

    def __len__(self) -> int:
        return self.bits.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, EncodedVector):
            return NotImplemented
        return (
            self.appliance_count == other.appliance_count
            and self.level_count == other.level_count
            and np.array_equal(self.bits, other.bits)
        )

    def __repr__(self) -> str:
        return (
            f"EncodedVector(n={self.appliance_count}, d={self.level_count}, "
            f"bits={''.join(map(str, self.bits.tolist()))})"
        )

    def blocks(self) -> np.ndarray:
        """View as an ``(n, d)`` array, one row per appliance."""
        return self.bits.reshape(self.appliance_count, self.level_count)

    def levels(self) -> np.ndarray:
        """Decode each block's single 1 back into a 1-based level."""
        blocks = self.blocks()
        if not np.all(blocks.sum(axis=1) == 1):
            raise ValueError("every block must contain exactly one 1 to decode levels")
        return self.level_count - np.argmax(blocks, axis=1)

    def copy(self) -> "EncodedVector":
        return EncodedVector(self.bits.copy(), self.appliance_count, self.level_count)


def build_scheme(
    level_count: int,
    max_energy: float,
    explicit_boundaries: Sequence[float] | None = None,
) -> QuantizationScheme:
    """Build a scheme of ``level_count`` ranges over ``[0, max_energy]``.

    Without explicit boundaries the ranges are equal width.
    """
    if level_count < 2:
        raise ValueError(f"level_count must be >= 2, got {level_count}")
    if not max_energy > 0:
        raise ValueError(f"max_energy must be > 0, got {max_energy}")
    if explicit_boundaries is not None:
        b = tuple(float(x) for x in explicit_boundaries)
        if len(b) != level_count + 1:
            raise ValueError(
                f"expected {level_count + 1} boundaries for {level_count} levels, got {len(b)}"
            )
        if b[-1] != max_energy:
            raise ValueError(f"last boundary {b[-1]} must equal max_energy {max_energy}")
        return QuantizationScheme(b)
    b = np.linspace(0.0, float(max_energy), level_count + 1)
    return QuantizationScheme(tuple(float(x) for x in b))


def map_readings(values, scheme: QuantizationScheme) -> np.ndarray:
    """Vectorized :func:`map_reading`; returns 1-based levels with the input's shape."""
    v = np.asarray(values, dtype=float)
    if np.any(v < 0) or np.any(np.isnan(v)):
        raise ValueError("energy readings must be non-negative")
    inner = np.asarray(scheme.boundaries[1:-1])
    # side="left" puts a value equal to a boundary into the lower range
    levels = np.searchsorted(inner, v, side="left") + 1
    if np.any(v > scheme.max_energy):
        logger.warning(
            "%d reading(s) above max_energy=%g clamped to level %d",
            int(np.count_nonzero(v > scheme.max_energy)),
            scheme.max_energy,
            scheme.level_count,
        )
    return levels


def map_reading(value: float, scheme: QuantizationScheme) -> int:
    """Level ``l`` with ``b[l-1] < value <= b[l]``; 0 maps to 1, overflow to ``d``."""
    if value < 0:
        raise ValueError(f"energy reading must be non-negative, got {value}")
    return int(map_readings(value, scheme))


def encode_level(level: int, d: int) -> np.ndarray:
    if not 1 <= level <= d:
        raise ValueError(f"level {level} outside 1..{d}")
    block = np.zeros(d, dtype=np.uint8)
    block[d - level] = 1
    return block


def encode_levels(levels, d: int) -> np.ndarray:
    """One-hot encode a sequence of levels into a flat concatenation of blocks."""
    levels = np.asarray(levels, dtype=np.int64)
    if np.any(levels < 1) or np.any(levels > d):
        raise ValueError(f"levels must lie in 1..{d}")
    out = np.zeros((levels.size, d), dtype=np.uint8)
    out[np.arange(levels.size), d - levels] = 1
    return out.reshape(-1)


def build_combined_vector(
    readings: Iterable[ApplianceReading],
    scheme: QuantizationScheme,
    appliance_count: int,
) -> EncodedVector:
    """Concatenate the blocks of appliances ``1..appliance_count`` in roster order.

    Appliances missing from ``readings`` are reported as 0 W (level 1).
    """
    values = np.zeros(appliance_count, dtype=float)
    seen = set()
    for r in readings:
        if not 1 <= r.appliance_id <= appliance_count:
            raise ValueError(
                f"appliance_id {r.appliance_id} outside roster 1..{appliance_count}"
            )
        if r.appliance_id in seen:
            raise ValueError(f"duplicate reading for appliance_id {r.appliance_id}")
        seen.add(r.appliance_id)
        values[r.appliance_id - 1] = r.value
    return encode_values(values, scheme)


def encode_values(values, scheme: QuantizationScheme) -> EncodedVector:
    """Map and encode a dense per-appliance value array in roster order."""
    levels = map_readings(values, scheme)
    d = scheme.level_count
    return EncodedVector(encode_levels(levels, d), len(levels), d)
