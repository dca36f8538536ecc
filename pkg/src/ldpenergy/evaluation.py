"""Utility measurements and the benchmark comparison against additive-noise baselines."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import aggregator as agg
from .config import ExperimentConfig
from .experiment import PreparedData, estimate_histograms, rep_seed, simulate_releases
from .quantizer import QuantizationScheme
from .rng import derive_seed
from .stats import DegenerateInputError, kruskal_wallis_counts

logger = logging.getLogger(__name__)

BASELINES = ("laplace", "gaussian", "gamma", "exponential_mech")
OURS = "ldp_smartenergy"
SIGNIFICANCE = 0.05
_SEED_BASELINE = 11


@dataclass
class SimilarityReport:
    per_appliance_p: np.ndarray
    mean_p: float
    similar_count: int


def _expand_counts(counts: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(counts), 0, None)


def similarity_report(
    true_histograms: Sequence[agg.EstimatedHistogram],
    estimated_histograms: Sequence[agg.EstimatedHistogram],
    scheme: QuantizationScheme,
) -> SimilarityReport:
    """Kruskal-Wallis p-value per appliance between true and estimated level samples.

    At every timestamp each histogram is read as a sample of per-user level
    observations (estimated counts rounded and clamped at 0). An appliance's
    p-value is the mean over timestamps; degenerate comparisons are NaN and
    left out of the means.
    """
    if len(true_histograms) != len(estimated_histograms) or not true_histograms:
        raise ValueError("need matching, non-empty sequences of histograms")
    n = true_histograms[0].appliance_count
    per_t = np.full((len(true_histograms), n), np.nan)
    for t, (h_true, h_est) in enumerate(zip(true_histograms, estimated_histograms)):
        if h_true.counts.shape != h_est.counts.shape:
            raise ValueError("appliance rosters or level counts differ")
        if h_true.level_count != scheme.level_count:
            raise ValueError("histograms do not match the scheme")
        for i in range(n):
            try:
                res = kruskal_wallis_counts([h_true.counts[i], _expand_counts(h_est.counts[i])])
            except (DegenerateInputError, ValueError):
                continue
            per_t[t, i] = res.p_value
    degenerate = int(np.isnan(per_t).sum())
    if degenerate:
        logger.warning("%d degenerate appliance comparisons excluded", degenerate)
    with np.errstate(all="ignore"):
        valid = ~np.isnan(per_t)
        per_app = np.where(valid.any(axis=0), np.nansum(per_t, axis=0) / np.maximum(valid.sum(axis=0), 1), np.nan)
    finite = per_app[~np.isnan(per_app)]
    mean_p = float(finite.mean()) if finite.size else math.nan
    return SimilarityReport(per_app, mean_p, int(np.sum(finite > SIGNIFICANCE)))


def gaussian_sigma(epsilon: float, sensitivity: float, delta: float) -> float:
    return math.sqrt(2.0 * math.log(1.25 / delta)) * sensitivity / epsilon


def benchmark_noise(
    kind: str,
    value,
    epsilon: float,
    sensitivity: float,
    rng: np.random.Generator,
    *,
    delta: float = 1e-5,
    shares: int = 1,
    grid: np.ndarray | None = None,
):
    """Noisy version of ``value`` (scalar or array) under one baseline mechanism.

    ``shares`` is the number of parties whose gamma noise adds up to one
    Laplace draw; ``grid`` holds the exponential mechanism's candidate outputs.
    """
    if not epsilon > 0 or not sensitivity > 0:
        raise ValueError("epsilon and sensitivity must be > 0")
    v = np.asarray(value, dtype=float)
    scale = sensitivity / epsilon
    if kind == "laplace":
        out = v + rng.laplace(0.0, scale, size=v.shape)
    elif kind == "gaussian":
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        out = v + rng.normal(0.0, gaussian_sigma(epsilon, sensitivity, delta), size=v.shape)
    elif kind == "gamma":
        if shares < 1:
            raise ValueError("shares must be >= 1")
        shape = 1.0 / shares
        out = v + rng.gamma(shape, scale, size=v.shape) - rng.gamma(shape, scale, size=v.shape)
    elif kind == "exponential_mech":
        if grid is None or len(grid) == 0:
            raise ValueError("exponential mechanism needs a candidate grid")
        g = np.asarray(grid, dtype=float)
        logits = -epsilon * np.abs(v[..., None] - g) / (2.0 * sensitivity)
        logits -= logits.max(axis=-1, keepdims=True)
        weights = np.exp(logits)
        cdf = np.cumsum(weights, axis=-1)
        u = rng.random(v.shape + (1,)) * cdf[..., -1:]
        choice = np.minimum((cdf < u).sum(axis=-1), g.size - 1)
        out = g[choice]
    else:
        raise ValueError(f"unknown mechanism {kind!r}; choose from {BASELINES}")
    return out if out.ndim else float(out)


@dataclass
class RepetitionResult:
    hits: int
    energy: np.ndarray
    mean_p: float
    per_appliance_p: np.ndarray
    publish_fraction: float
    seconds_per_release: float


def run_ldp_repetition(data: PreparedData, config: ExperimentConfig, repetition: int) -> RepetitionResult:
    seed = rep_seed(config, repetition)
    start = time.perf_counter()
    grouped, publishes = simulate_releases(data, config, seed)
    elapsed = time.perf_counter() - start
    est = estimate_histograms(grouped, config.estimator_mode)
    energy = agg.estimate_energy(est, data.scheme)
    _, hits = agg.hit_rate(
        agg.rank_appliances(data.true_energy), agg.rank_appliances(energy), config.top_k
    )
    sim = similarity_report(data.true_histograms, est, data.scheme)
    releases = data.user_count * data.day_count
    return RepetitionResult(
        hits, energy, sim.mean_p, sim.per_appliance_p,
        float(publishes.sum()) / releases, elapsed / releases,
    )


def run_baseline_repetition(
    kind: str, data: PreparedData, watts: np.ndarray, config: ExperimentConfig, repetition: int
) -> tuple[int, np.ndarray, float]:
    """Hit count, estimated energies and seconds per release for one baseline run.

    Every reading gets independent noise at ``baseline_epsilon``; the server
    sums the noisy readings per appliance.
    """
    rng = np.random.default_rng(derive_seed(config.seed, _SEED_BASELINE, BASELINES.index(kind), repetition))
    start = time.perf_counter()
    noisy = benchmark_noise(
        kind, watts, config.baseline_epsilon, config.sensitivity, rng,
        delta=config.delta, shares=watts.shape[0], grid=data.scheme.midpoints(),
    )
    elapsed = time.perf_counter() - start
    energy = noisy.sum(axis=(0, 1))
    _, hits = agg.hit_rate(
        agg.rank_appliances(data.true_energy), agg.rank_appliances(energy), config.top_k
    )
    return hits, energy, elapsed / (watts.shape[0] * watts.shape[1])


@dataclass
class MechanismSummary:
    hits: list[int]
    seconds_per_release: float

    @property
    def mean_hits(self) -> float:
        return float(np.mean(self.hits))

    def to_dict(self) -> dict:
        h = np.asarray(self.hits)
        return {
            "hits": [int(x) for x in h],
            "mean": float(h.mean()),
            "median": float(np.median(h)),
            "min": int(h.min()),
            "max": int(h.max()),
        }


@dataclass
class BenchmarkReport:
    mechanisms: dict[str, MechanismSummary]
    config: dict = field(default_factory=dict)

    def mean_hits(self) -> dict[str, float]:
        return {k: v.mean_hits for k, v in self.mechanisms.items()}

    def to_dict(self) -> dict:
        return {"config": self.config, "mechanisms": {k: v.to_dict() for k, v in self.mechanisms.items()}}


def quantized_watts(data: PreparedData) -> np.ndarray:
    """Readings at level midpoints; the baselines see the same resolution as the truth."""
    return data.scheme.midpoints()[data.levels - 1]


def run_benchmark_suite(
    data: PreparedData,
    config: ExperimentConfig,
    ldp_results: Sequence[RepetitionResult] | None = None,
) -> BenchmarkReport:
    """Hit counts of the LDP pipeline and the four baselines over ``config.repetitions`` runs."""
    if config.repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if ldp_results is None:
        ldp_results = [run_ldp_repetition(data, config, r) for r in range(config.repetitions)]
    mechanisms = {
        OURS: MechanismSummary(
            [r.hits for r in ldp_results],
            float(np.mean([r.seconds_per_release for r in ldp_results])),
        )
    }
    watts = quantized_watts(data)
    for kind in BASELINES:
        runs = [run_baseline_repetition(kind, data, watts, config, r) for r in range(config.repetitions)]
        mechanisms[kind] = MechanismSummary([h for h, _, _ in runs], float(np.mean([s for _, _, s in runs])))
    echo = {
        "baseline_epsilon": config.baseline_epsilon,
        "baseline_sensitivity": config.sensitivity,
        "delta": config.delta,
        "epsilon": config.epsilon,
        "repetitions": config.repetitions,
        "top_k": config.top_k,
    }
    return BenchmarkReport(mechanisms, echo)
