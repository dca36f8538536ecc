"""Population simulation shared by the evaluation suite and the CLI."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import aggregator as agg
from . import datagen
from .client import UserState, process_encoded
from .config import ExperimentConfig
from .quantizer import EncodedVector, QuantizationScheme, build_scheme, encode_levels, map_readings
from .rng import derive_seed

logger = logging.getLogger(__name__)

# sub-seed labels
_SEED_PANEL, _SEED_AUGMENT, _SEED_SYNTH, _SEED_REP, _SEED_LSP = 1, 2, 3, 4, 5


def profile_for(appliance_count: int) -> dict:
    """Seed profile for any roster size; rosters beyond 15 repeat it at lower scale."""
    base = datagen.SEED_PROFILE
    size = len(base["mean_watts"])
    out = {key: [] for key in base}
    for i in range(appliance_count):
        factor = 0.8 ** (i // size)
        for key in base:
            v = base[key][i % size]
            out[key].append(v * factor if key == "mean_watts" else v)
    return out


def build_dataset(config: ExperimentConfig) -> datagen.Dataset:
    if config.input_csv is not None:
        ds = datagen.ingest_csv(config.input_csv)
        if ds.appliance_count != config.appliance_count:
            raise ValueError(
                f"{config.input_csv} has {ds.appliance_count} appliances, config expects "
                f"{config.appliance_count}"
            )
        return ds
    if config.distribution == "households":
        panel = datagen.seed_households(
            config.seed_households,
            config.day_count,
            seed=derive_seed(config.seed, _SEED_PANEL),
            max_energy=config.max_energy,
            profile=profile_for(config.appliance_count),
        )
        return datagen.augment(
            datagen.derive_stats(panel),
            config.user_count,
            config.day_count,
            seed=derive_seed(config.seed, _SEED_AUGMENT),
        )
    return datagen.gen_synthetic(
        config.distribution,
        config.user_count,
        config.appliance_count,
        config.day_count,
        seed=derive_seed(config.seed, _SEED_SYNTH),
        max_energy=config.max_energy,
    )


@dataclass
class PreparedData:
    """Quantized view of a dataset: true levels and per-timestamp truth."""

    scheme: QuantizationScheme
    levels: np.ndarray  # (users, days, n), 1-based
    user_ids: np.ndarray
    observed: np.ndarray
    true_histograms: list[agg.EstimatedHistogram]
    true_energy: np.ndarray

    @property
    def user_count(self) -> int:
        return self.levels.shape[0]

    @property
    def day_count(self) -> int:
        return self.levels.shape[1]

    @property
    def appliance_count(self) -> int:
        return self.levels.shape[2]


def prepare(dataset: datagen.Dataset, config: ExperimentConfig) -> PreparedData:
    scheme = build_scheme(config.level_count, config.max_energy)
    # gap days are zero readings
    watts = np.where(dataset.observed[:, :, None], dataset.watts, 0.0)
    levels = map_readings(watts, scheme)
    hists = [
        agg.true_histogram(levels[:, t, :], scheme.level_count, t + 1)
        for t in range(levels.shape[1])
    ]
    return PreparedData(
        scheme, levels, dataset.user_ids, dataset.observed, hists, agg.estimate_energy(hists, scheme)
    )


def lsp_phase(config: ExperimentConfig, rep_seed: int, user_id: int) -> int:
    if config.lsp_sampling_rule == "first":
        return 0
    return int(derive_seed(rep_seed, _SEED_LSP, int(user_id)) % config.window_size)


def rep_seed(config: ExperimentConfig, repetition: int) -> int:
    return derive_seed(config.seed, _SEED_REP, repetition)


def simulate_releases(
    data: PreparedData, config: ExperimentConfig, seed: int, users: slice | None = None
) -> tuple[list[dict[float, agg.RoundSums]], np.ndarray]:
    """Run every selected user's stream; returns per-timestamp grouped sums and publish counts.

    Partial results from disjoint user slices merge with
    :func:`aggregator.merge_grouped`.
    """
    n, d = data.appliance_count, data.scheme.level_count
    idx = range(data.user_count)[users or slice(None)]
    rounds: list[list] = [[] for _ in range(data.day_count)]
    publishes = np.zeros(data.day_count, dtype=np.int64)
    for u in idx:
        uid = int(data.user_ids[u])
        state = UserState.create(
            uid, n, data.scheme, config.epsilon, config.window_size, config.scheduler_kind,
            seed=seed, dissimilarity_form=config.dissimilarity_form,
            lsp_phase=lsp_phase(config, seed, uid),
        )
        bits = encode_levels(data.levels[u].reshape(-1), d).reshape(data.day_count, n * d)
        for t in range(data.day_count):
            rec = process_encoded(state, EncodedVector(bits[t], n, d), t + 1)
            rounds[t].append(rec)
            publishes[t] += rec.strategy.value == "publish"
    return [agg.accumulate_grouped(r) for r in rounds], publishes


def estimate_histograms(
    grouped_rounds: list[dict[float, agg.RoundSums]], mode: str
) -> list[agg.EstimatedHistogram]:
    return [agg.estimate_grouped(g, mode, t + 1) for t, g in enumerate(grouped_rounds)]
