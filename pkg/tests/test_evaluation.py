import math

import numpy as np
import pytest

from ldpenergy import aggregator as agg
from ldpenergy import evaluation as ev
from ldpenergy.config import parse_config
from ldpenergy.experiment import build_dataset, estimate_histograms, prepare, rep_seed, simulate_releases
from ldpenergy.quantizer import build_scheme

SMALL = dict(user_count=80, day_count=8, repetitions=3, seed_households=10)


@pytest.fixture(scope="module")
def small():
    cfg = parse_config(overrides=SMALL)
    return cfg, prepare(build_dataset(cfg), cfg)


def test_identical_histograms_have_p_one():
    s = build_scheme(10, 3000)
    rng = np.random.default_rng(0)
    hs = [agg.true_histogram(rng.integers(1, 11, (200, 4)), 10, t) for t in range(3)]
    r = ev.similarity_report(hs, hs, s)
    np.testing.assert_allclose(r.per_appliance_p, 1.0)
    assert r.similar_count == 4


def test_unrelated_histograms_have_small_p():
    s = build_scheme(10, 3000)
    rng = np.random.default_rng(1)
    low = [agg.true_histogram(rng.integers(1, 4, (300, 5)), 10) for _ in range(5)]
    high = [agg.true_histogram(rng.integers(6, 11, (300, 5)), 10) for _ in range(5)]
    assert ev.similarity_report(low, high, s).mean_p < 0.05


def test_similarity_clamps_negative_estimates_and_checks_shapes():
    s = build_scheme(3, 3000)
    true = [agg.EstimatedHistogram(1, np.array([[5.0, 3.0, 0.0]]), 8)]
    est = [agg.EstimatedHistogram(1, np.array([[5.2, 2.6, -4.0]]), 8)]
    assert ev.similarity_report(true, est, s).per_appliance_p[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ev.similarity_report(true, [], s)
    with pytest.raises(ValueError):
        ev.similarity_report(true, [agg.EstimatedHistogram(1, np.zeros((2, 3)), 8)], s)


def test_degenerate_comparison_is_excluded():
    s = build_scheme(3, 3000)
    true = [agg.EstimatedHistogram(1, np.array([[5.0, 0, 0], [1.0, 2.0, 3.0]]), 6)]
    est = [agg.EstimatedHistogram(1, np.array([[5.0, 0, 0], [1.0, 2.0, 3.0]]), 6)]
    r = ev.similarity_report(true, est, s)
    assert math.isnan(r.per_appliance_p[0]) and r.mean_p == pytest.approx(1.0)


def test_laplace_noise_is_centered():
    rng = np.random.default_rng(0)
    noise = ev.benchmark_noise("laplace", np.zeros(10**6), 1.0, 3000, rng)
    assert abs(noise.mean()) <= 15


def test_gaussian_noise_scale():
    rng = np.random.default_rng(1)
    sigma = ev.gaussian_sigma(1.0, 3000, 1e-5)
    assert sigma == pytest.approx(math.sqrt(2 * math.log(1.25e5)) * 3000)
    noise = ev.benchmark_noise("gaussian", np.zeros(10**6), 1.0, 3000, rng, delta=1e-5)
    assert abs(noise.std() / sigma - 1) < 0.01


def test_gamma_shares_sum_to_laplace():
    rng = np.random.default_rng(2)
    shares = 5
    parts = ev.benchmark_noise("gamma", np.zeros((shares, 200_000)), 1.0, 10.0, rng, shares=shares)
    total = parts.sum(axis=0)
    # a Laplace(b) variable has variance 2 b^2 and kurtosis 6
    assert total.var() == pytest.approx(2 * 10.0**2, rel=0.02)
    assert ((total - total.mean()) ** 4).mean() / total.var() ** 2 == pytest.approx(6, rel=0.1)


def test_exponential_mechanism_limit_and_range():
    grid = build_scheme(10, 3000).midpoints()
    rng = np.random.default_rng(3)
    out = ev.benchmark_noise("exponential_mech", np.array([100.0, 1000.0, 2990.0]), 1e6, 3000, rng, grid=grid)
    assert out.tolist() == [150.0, 1050.0, 2850.0]
    wide = ev.benchmark_noise("exponential_mech", np.full(1000, 100.0), 1.0, 3000, rng, grid=grid)
    assert set(np.unique(wide)) <= set(grid)


@pytest.mark.parametrize("kwargs", [
    dict(kind="laplace", epsilon=0),
    dict(kind="laplace", sensitivity=0),
    dict(kind="gaussian", delta=1.0),
    dict(kind="gamma", shares=0),
    dict(kind="exponential_mech"),
    dict(kind="unknown"),
])
def test_benchmark_noise_errors(kwargs):
    args = dict(value=1.0, epsilon=1.0, sensitivity=1.0, rng=np.random.default_rng(0))
    args.update(kwargs)
    kind = args.pop("kind")
    with pytest.raises(ValueError):
        ev.benchmark_noise(kind, **args)


def test_scalar_input_returns_float():
    assert isinstance(ev.benchmark_noise("laplace", 5.0, 1.0, 1.0, np.random.default_rng(0)), float)


def test_user_slices_merge_to_whole_population(small):
    cfg, data = small
    seed = rep_seed(cfg, 0)
    whole, pub = simulate_releases(data, cfg, seed)
    a, pa = simulate_releases(data, cfg, seed, slice(0, 30))
    b, pb = simulate_releases(data, cfg, seed, slice(30, None))
    merged = [agg.merge_grouped(x, y) for x, y in zip(a, b)]
    for h1, h2 in zip(estimate_histograms(whole, "standard"), estimate_histograms(merged, "standard")):
        np.testing.assert_allclose(h1.counts, h2.counts)
    assert np.array_equal(pub, pa + pb)


def test_benchmark_suite_is_deterministic(small):
    cfg, data = small
    a = ev.run_benchmark_suite(data, cfg).to_dict()
    b = ev.run_benchmark_suite(data, cfg).to_dict()
    assert a == b
    assert set(a["mechanisms"]) == {ev.OURS, *ev.BASELINES}
    assert all(len(m["hits"]) == 3 for m in a["mechanisms"].values())


def test_zero_repetitions_rejected(small):
    with pytest.raises(ValueError):
        parse_config(overrides={**SMALL, "repetitions": 0})


def test_all_schedulers_run_end_to_end(small):
    cfg, data = small
    for kind in ("LBU", "LSP", "LBD", "LBA"):
        r = ev.run_ldp_repetition(data, cfg.replace(scheduler_kind=kind), 0)
        assert 0 <= r.hits <= cfg.top_k and 0 < r.publish_fraction <= 1
        assert r.energy.shape == (15,)
    lsp = ev.run_ldp_repetition(data, cfg.replace(scheduler_kind="LSP", lsp_sampling_rule="random"), 0)
    assert lsp.publish_fraction == pytest.approx(1 / 3, abs=0.15)
