"""Command line harness: generate datasets, run experiments, benchmark, evaluate.

Exit status is 0 on success, 2 for configuration or usage errors and 1 for
failures while running.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import aggregator as agg
from . import datagen
from .config import ConfigError, ExperimentConfig, parse_config
from .evaluation import (
    BASELINES,
    OURS,
    RepetitionResult,
    run_benchmark_suite,
    run_ldp_repetition,
)
from .experiment import PreparedData, build_dataset, prepare
from .scheduler import SchedulerKind

logger = logging.getLogger("ldpenergy")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
SCHEMA_VERSION = 1
OUT_ENV = "LDPENERGY_OUT"
RESULTS_FILE, SUMMARY_FILE = "results.json", "summary.txt"
BENCHMARK_FILE, BENCHMARK_SUMMARY = "benchmark.json", "benchmark.txt"

# flag -> config field
FLAG_FIELDS = {
    "epsilon": "epsilon",
    "window": "window_size",
    "levels": "level_count",
    "appliances": "appliance_count",
    "users": "user_count",
    "days": "day_count",
    "seed": "seed",
    "reps": "repetitions",
    "top_k": "top_k",
    "estimator": "estimator_mode",
    "distribution": "distribution",
    "input": "input_csv",
    "workers": "workers",
    "delta": "delta",
    "max_energy": "max_energy",
    "dissimilarity": "dissimilarity_form",
    "lsp_rule": "lsp_sampling_rule",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep argparse from exiting on its own
        raise _UsageError(f"{self.prog}: {message}")


def _add_config_flags(p: argparse.ArgumentParser, with_method: bool = True) -> None:
    p.add_argument("--config", help="JSON configuration file; flags override its values")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--window", type=int, help="window size w")
    p.add_argument("--levels", type=int, help="quantization level count d")
    p.add_argument("--appliances", type=int)
    p.add_argument("--users", type=int)
    p.add_argument("--days", type=int)
    if with_method:
        p.add_argument("--method", help="LBU, LSP, LBD, LBA or 'all' for a sweep")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int, help="repetitions")
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--estimator", help="standard or paper_literal")
    p.add_argument("--distribution", help="households, uniform, normal, skew_left or skew_right")
    p.add_argument("--input", help="CSV dataset instead of generated data")
    p.add_argument("--workers", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--max-energy", dest="max_energy", type=float)
    p.add_argument("--dissimilarity", help="squared or absolute")
    p.add_argument("--lsp-rule", dest="lsp_rule", help="first or random")
    p.add_argument("--out", help=f"output directory or file (default ${OUT_ENV} or ./results)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ldpenergy", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add_config_flags(sub.add_parser("generate", help="write a dataset as CSV"), with_method=False)
    _add_config_flags(sub.add_parser("run", help="run the full experiment"))
    _add_config_flags(sub.add_parser("benchmark", help="compare against additive-noise baselines"))
    ev = sub.add_parser("evaluate", help="summarize an existing results file")
    ev.add_argument("results", help="results.json or benchmark.json")
    ev.add_argument("--out", help="write the summary here instead of stdout")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {
        field: getattr(args, flag)
        for flag, field in FLAG_FIELDS.items()
        if getattr(args, flag, None) is not None
    }
    method = getattr(args, "method", None)
    if method is not None and method.lower() != "all":
        overrides["scheduler_kind"] = method.upper()
    return parse_config(args.config, overrides)


def methods_from_args(args: argparse.Namespace, config: ExperimentConfig) -> list[str]:
    method = getattr(args, "method", None)
    if method is not None and method.lower() == "all":
        return list(SchedulerKind.__members__)
    return [config.scheduler_kind]


def output_dir(out: str | None) -> Path:
    return Path(out or os.environ.get(OUT_ENV) or "results")


# --- repetition fan-out -------------------------------------------------

_worker_state: tuple[PreparedData, ExperimentConfig] | None = None


def _init_worker(data: PreparedData, config: ExperimentConfig) -> None:
    global _worker_state
    _worker_state = (data, config)


def _worker_rep(r: int) -> RepetitionResult:
    data, config = _worker_state
    return run_ldp_repetition(data, config, r)


def run_repetitions(data: PreparedData, config: ExperimentConfig) -> list[RepetitionResult]:
    """All repetitions in index order; each depends only on its own seed."""
    reps = range(config.repetitions)
    if config.workers == 1 or config.repetitions == 1:
        return [run_ldp_repetition(data, config, r) for r in reps]
    with ProcessPoolExecutor(config.workers, initializer=_init_worker, initargs=(data, config)) as pool:
        return list(pool.map(_worker_rep, reps))


# --- reports ----------------------------------------------------------------


def _clean(x: Any) -> Any:
    """JSON-safe copy: numpy scalars become Python ones, NaN becomes null."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def dumps(doc: dict) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _stats(values) -> dict:
    v = np.asarray(values, dtype=float)
    return {"mean": float(v.mean()), "median": float(np.median(v)), "min": float(v.min()), "max": float(v.max())}


def _ranking_table(energies, k: int) -> list[dict]:
    return [
        {"rank": i + 1, "appliance_id": a, "energy": e}
        for i, (a, e) in enumerate(agg.top_k(energies, k).entries)
    ]


def method_report(data: PreparedData, config: ExperimentConfig, results: Sequence[RepetitionResult]) -> dict:
    energy = np.mean([r.energy for r in results], axis=0)
    with np.errstate(all="ignore"):
        per_app = np.nanmean(np.array([r.per_appliance_p for r in results], dtype=float), axis=0)
    return {
        "hits": [r.hits for r in results],
        "hit_stats": _stats([r.hits for r in results]),
        "hit_rate_mean": float(np.mean([r.hits for r in results])) / config.top_k,
        "mean_p": float(np.nanmean([r.mean_p for r in results])),
        "per_appliance_p": per_app,
        "similar_appliances": int(np.sum(per_app > 0.05)),
        "publish_fraction": float(np.mean([r.publish_fraction for r in results])),
        "estimated_energy": energy,
        "estimated_top_k": _ranking_table(energy, config.top_k),
        "estimated_impact_shares": agg.impact_shares(energy),
    }


def run_experiment(config: ExperimentConfig, out: Path | None = None, methods: Sequence[str] | None = None) -> dict:
    """Generate data, run every method for all repetitions, optionally write reports.

    The results document holds no timings, so it is byte-identical for a
    given configuration regardless of the worker count.
    """
    data = prepare(build_dataset(config), config)
    methods = list(methods or [config.scheduler_kind])
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "run",
        "config": {k: v for k, v in config.to_dict().items() if k != "workers"},
        "truth": {
            "energy": data.true_energy,
            "top_k": _ranking_table(data.true_energy, config.top_k),
            "impact_shares": agg.impact_shares(data.true_energy),
        },
        "methods": {},
    }
    for m in methods:
        cfg = config if m == config.scheduler_kind else config.replace(scheduler_kind=m)
        logger.info("running %s for %d repetitions", m, cfg.repetitions)
        doc["methods"][m] = method_report(data, cfg, run_repetitions(data, cfg))
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / RESULTS_FILE).write_text(dumps(doc), encoding="utf-8")
        (out / SUMMARY_FILE).write_text(summarize(doc), encoding="utf-8")
    return doc


def run_benchmark(config: ExperimentConfig, out: Path | None = None) -> dict:
    data = prepare(build_dataset(config), config)
    report = run_benchmark_suite(data, config, run_repetitions(data, config))
    doc = {"schema_version": SCHEMA_VERSION, "kind": "benchmark", **report.to_dict()}
    doc["config"] = {k: v for k, v in config.to_dict().items() if k != "workers"}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / BENCHMARK_FILE).write_text(dumps(doc), encoding="utf-8")
        (out / BENCHMARK_SUMMARY).write_text(summarize(doc), encoding="utf-8")
    return doc


def _fmt(x) -> str:
    return "nan" if x is None else f"{x:.4g}"


def summarize(doc: dict) -> str:
    """Plain-text tables for a run or benchmark document."""
    doc = _clean(doc)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
    lines = []
    if doc["kind"] == "benchmark":
        lines.append(f"{'mechanism':<18}{'mean':>8}{'median':>8}{'min':>6}{'max':>6}")
        for name in [OURS, *BASELINES]:
            if name in doc["mechanisms"]:
                s = doc["mechanisms"][name]
                lines.append(f"{name:<18}{s['mean']:>8.2f}{s['median']:>8.1f}{s['min']:>6}{s['max']:>6}")
        return "\n".join(lines) + "\n"
    cfg = doc["config"]
    k = cfg["top_k"]
    lines.append(
        f"eps={cfg['epsilon']} w={cfg['window_size']} d={cfg['level_count']} "
        f"n={cfg['appliance_count']} users={cfg['user_count']} days={cfg['day_count']} "
        f"reps={cfg['repetitions']} seed={cfg['seed']}"
    )
    lines.append("")
    lines.append(f"{'method':<8}{'mean_p':>10}{'similar':>9}{'hits mean':>11}{'median':>8}{'min':>6}{'max':>6}{'publish':>9}")
    for m, r in doc["methods"].items():
        h = r["hit_stats"]
        lines.append(
            f"{m:<8}{_fmt(r['mean_p']):>10}{r['similar_appliances']:>9}{h['mean']:>11.2f}"
            f"{h['median']:>8.1f}{h['min']:>6.0f}{h['max']:>6.0f}{r['publish_fraction']:>9.2f}"
        )
    true_shares = doc["truth"]["impact_shares"]
    for m, r in doc["methods"].items():
        lines.append("")
        lines.append(f"top-{k} ({m}): true vs estimated, with impact shares (%)")
        lines.append(f"{'rank':<6}{'true':>6}{'share':>8}{'est':>6}{'share':>8}")
        est_shares = r["estimated_impact_shares"]
        for t_row, e_row in zip(doc["truth"]["top_k"], r["estimated_top_k"]):
            a, b = t_row["appliance_id"], e_row["appliance_id"]
            mark = " *" if a == b else ""
            lines.append(
                f"{t_row['rank']:<6}{'A' + str(a):>6}{true_shares[a - 1]:>8.2f}"
                f"{'A' + str(b):>6}{est_shares[b - 1]:>8.2f}{mark}"
            )
    return "\n".join(lines) + "\n"


# --- commands -----------------------------------------------------------


def _cmd_generate(args) -> int:
    config = config_from_args(args)
    target = Path(args.out) if args.out and args.out.endswith(".csv") else output_dir(args.out) / "dataset.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    datagen.write_csv(build_dataset(config), target)
    print(target)
    return EXIT_OK


def _cmd_run(args) -> int:
    config = config_from_args(args)
    out = output_dir(args.out)
    doc = run_experiment(config, out, methods_from_args(args, config))
    sys.stdout.write(summarize(doc))
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    config = config_from_args(args)
    doc = run_benchmark(config, output_dir(args.out))
    sys.stdout.write(summarize(doc))
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    path = Path(args.results)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: cannot read results: {exc}") from None
    text = summarize(doc)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"generate": _cmd_generate, "run": _cmd_run, "benchmark": _cmd_benchmark, "evaluate": _cmd_evaluate}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        logger.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
