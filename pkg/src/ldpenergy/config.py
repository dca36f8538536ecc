"""Experiment configuration: defaults, strict JSON loading, flag overrides."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

from .aggregator import PAPER_LITERAL, STANDARD
from .datagen import DISTRIBUTIONS
from .scheduler import SchedulerKind

DATA_SOURCES = ("households",) + DISTRIBUTIONS


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    epsilon: float = 10.0
    window_size: int = 3
    level_count: int = 10
    appliance_count: int = 15
    user_count: int = 1000
    day_count: int = 30
    scheduler_kind: str = "LBA"
    estimator_mode: str = STANDARD
    dissimilarity_form: str = "squared"
    lsp_sampling_rule: str = "first"
    # "households" augments a seed household panel; otherwise a synthetic family
    distribution: str = "households"
    input_csv: Optional[str] = None
    seed: int = 0
    repetitions: int = 100
    top_k: int = 10
    delta: float = 1e-5
    max_energy: float = 3000.0
    seed_households: int = 39
    baseline_epsilon: float = 1.0
    # None means the full metering range, max_energy
    baseline_sensitivity: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        errors = []
        for name in ("epsilon", "max_energy", "delta", "baseline_epsilon"):
            if not getattr(self, name) > 0:
                errors.append(f"{name} must be > 0")
        for name in ("window_size", "appliance_count", "user_count", "day_count",
                     "repetitions", "top_k", "seed_households", "workers"):
            if getattr(self, name) < 1:
                errors.append(f"{name} must be >= 1")
        if self.level_count < 2:
            errors.append("level_count must be >= 2")
        if self.top_k > self.appliance_count:
            errors.append(f"top_k={self.top_k} exceeds appliance_count={self.appliance_count}")
        if self.scheduler_kind not in SchedulerKind.__members__:
            errors.append(f"scheduler_kind must be one of {list(SchedulerKind.__members__)}")
        if self.estimator_mode not in (STANDARD, PAPER_LITERAL):
            errors.append(f"estimator_mode must be {STANDARD!r} or {PAPER_LITERAL!r}")
        if self.dissimilarity_form not in ("squared", "absolute"):
            errors.append("dissimilarity_form must be 'squared' or 'absolute'")
        if self.lsp_sampling_rule not in ("first", "random"):
            errors.append("lsp_sampling_rule must be 'first' or 'random'")
        if self.distribution not in DATA_SOURCES:
            errors.append(f"distribution must be one of {DATA_SOURCES}")
        if not self.delta < 1:
            errors.append("delta must be < 1")
        if self.baseline_sensitivity is not None and not self.baseline_sensitivity > 0:
            errors.append("baseline_sensitivity must be > 0")
        if self.distribution == "households" and self.input_csv is None \
                and self.user_count < self.seed_households:
            errors.append("user_count must be >= seed_households when augmenting")
        if errors:
            raise ConfigError("; ".join(errors))

    @property
    def sensitivity(self) -> float:
        return self.max_energy if self.baseline_sensitivity is None else self.baseline_sensitivity

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ExperimentConfig":
        return parse_config(overrides={**self.to_dict(), **changes})


FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name: str, value: Any) -> Any:
    default = FIELDS[name].default
    if value is None:
        return None
    kind = type(default) if default is not None else None
    if name == "input_csv":
        return str(value)
    if name == "baseline_sensitivity":
        kind = float
    try:
        if kind is bool or isinstance(value, bool) and kind in (int, float):
            raise TypeError
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise TypeError
            return int(value)
        if kind is float:
            return float(value)
        if kind is str:
            return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot use {value!r} as {kind.__name__}") from None
    return value


def parse_config(
    path: str | Path | None = None, overrides: Mapping[str, Any] | None = None
) -> ExperimentConfig:
    """Resolve defaults, then the JSON file at ``path``, then ``overrides``.

    Unknown keys in either source are rejected. An empty file yields the
    defaults.
    """
    values: dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        if text.strip():
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON: {exc}") from None
            if not isinstance(doc, dict):
                raise ConfigError(f"{path}: top level must be an object")
            values.update(doc)
    values.update(overrides or {})
    unknown = sorted(set(values) - set(FIELDS))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    try:
        return ExperimentConfig(**{k: _coerce(k, v) for k, v in values.items()})
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
