"""Counter-based random streams keyed by (master seed, user, timestamp).

Every (seed, user, timestamp) triple gets its own Philox stream, so a user's
draws never depend on how many other users were processed before it or on
which worker ran it.
"""

from __future__ import annotations

import functools

import numpy as np

_KEY_WORDS = 2


@functools.lru_cache(maxsize=64)
def _key(*parts: int) -> np.ndarray:
    ss = np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])
    return ss.generate_state(_KEY_WORDS, dtype=np.uint64)


def stream_rng(seed: int, user_id: int, timestamp: int, purpose: int = 0) -> np.random.Generator:
    """Generator for one user at one timestamp.

    ``purpose`` separates independent uses (e.g. scheduler randomness vs.
    baseline noise) that share the same user and timestamp.
    """
    key = _key(int(seed), int(purpose))
    counter = np.array([0, int(timestamp), int(user_id), 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def derive_seed(seed: int, *parts: int) -> int:
    """Child seed for a repetition, dataset, or other sub-experiment."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(p) for p in parts]])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)
