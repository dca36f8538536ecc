"""One user's per-timestamp flow: map, encode, combine, schedule, release."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import scheduler as sched
from .quantizer import (
    ApplianceReading,
    EncodedVector,
    QuantizationScheme,
    build_combined_vector,
    encode_values,
)
from .randomizer import oue_probabilities, perturb
from .rng import stream_rng


@dataclass
class UserState:
    user_id: int
    appliance_count: int
    scheme: QuantizationScheme
    ledger: sched.WindowLedger
    scheduler_kind: sched.SchedulerKind
    seed: int
    dissimilarity_form: str = "squared"
    lsp_phase: int = 0
    last_t: int = 0

    @classmethod
    def create(
        cls,
        user_id: int,
        appliance_count: int,
        scheme: QuantizationScheme,
        epsilon: float,
        window_size: int,
        scheduler_kind,
        seed: int,
        dissimilarity_form: str = "squared",
        lsp_phase: int = 0,
    ) -> "UserState":
        return cls(
            user_id=user_id,
            appliance_count=appliance_count,
            scheme=scheme,
            ledger=sched.WindowLedger(epsilon, window_size),
            scheduler_kind=sched.SchedulerKind(scheduler_kind),
            seed=seed,
            dissimilarity_form=dissimilarity_form,
            lsp_phase=lsp_phase,
        )


@dataclass(frozen=True)
class ReleaseRecord:
    """What one user sends to the server at one timestamp.

    ``vector_epsilon`` is the budget the released bits were perturbed with;
    for an approximation it is that of the re-released publication, which the
    server needs to pick the matching estimator.
    """

    user_id: int
    timestamp: int
    released_vector: EncodedVector = field(compare=False)
    strategy: sched.Strategy
    spent_budget_t1: float
    spent_budget_t2: float
    vector_epsilon: float


def _perturb_fn(state: UserState, rng: np.random.Generator):
    n = state.appliance_count

    def fn(vec: EncodedVector, eps: float) -> EncodedVector:
        return perturb(vec, oue_probabilities(eps, n), rng)

    return fn


def process_encoded(state: UserState, c_t: EncodedVector, t: int) -> ReleaseRecord:
    """Scheduler and release step for an already encoded vector."""
    if t <= state.last_t:
        raise ValueError(f"user {state.user_id}: timestamp {t} not after {state.last_t}")
    rng = stream_rng(state.seed, state.user_id, t)
    decision = sched.step(
        state.scheduler_kind,
        state.ledger,
        c_t,
        t,
        _perturb_fn(state, rng),
        form=state.dissimilarity_form,
        lsp_phase=state.lsp_phase,
    )
    state.last_t = t
    return ReleaseRecord(
        user_id=state.user_id,
        timestamp=t,
        released_vector=decision.candidate,
        strategy=decision.strategy,
        spent_budget_t1=decision.dissimilarity_budget,
        spent_budget_t2=decision.publication_budget,
        vector_epsilon=decision.release_budget,
    )


def process_timestamp(
    state: UserState, readings: Sequence[ApplianceReading], t: int
) -> ReleaseRecord:
    c_t = build_combined_vector(readings, state.scheme, state.appliance_count)
    return process_encoded(state, c_t, t)


def run_stream(
    state: UserState,
    rows: Mapping[int, Sequence[ApplianceReading] | np.ndarray] | Iterable,
    day_count: int,
) -> list[ReleaseRecord]:
    """Release one record for every timestamp ``1..day_count``.

    ``rows`` maps a timestamp to its readings (either ``ApplianceReading``
    objects or a dense per-appliance watt array). Timestamps absent from
    ``rows`` are filled with all-appliances-off readings.
    """
    if not isinstance(rows, Mapping):
        rows = dict(rows)
    off = np.zeros(state.appliance_count)
    records = []
    for t in range(1, day_count + 1):
        r = rows.get(t)
        if r is None:
            c_t = encode_values(off, state.scheme)
        elif isinstance(r, np.ndarray):
            c_t = encode_values(r, state.scheme)
        else:
            c_t = build_combined_vector(r, state.scheme, state.appliance_count)
        records.append(process_encoded(state, c_t, t))
    return records
