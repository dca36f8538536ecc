import numpy as np
import pytest

from ldpenergy.client import UserState, process_encoded, process_timestamp, run_stream
from ldpenergy.quantizer import ApplianceReading, build_scheme, encode_values
from ldpenergy.scheduler import Strategy

SCHEME = build_scheme(10, 3000)
READINGS = [ApplianceReading(1, 120.0), ApplianceReading(2, 2400.0), ApplianceReading(3, 900.0)]


def state(kind, eps=10.0, w=3, seed=0, user=1, n=3):
    return UserState.create(user, n, SCHEME, eps, w, kind, seed=seed)


def test_lbu_record():
    rec = process_timestamp(state("LBU"), READINGS, 1)
    assert rec.strategy is Strategy.PUBLISH
    assert rec.spent_budget_t2 == pytest.approx(10 / 3)
    assert rec.spent_budget_t1 == 0
    assert len(rec.released_vector) == 30


def test_lsp_non_sampling_reuses_prior_release():
    st = state("LSP")
    first = process_timestamp(st, READINGS, 1)
    for t in (2, 3):
        rec = process_timestamp(st, [ApplianceReading(1, 2999.0)], t)
        assert rec.strategy is Strategy.APPROXIMATE
        assert np.array_equal(rec.released_vector.bits, first.released_vector.bits)
        assert rec.spent_budget_t2 == 0


@pytest.mark.xfail(strict=True, reason=(
    "the literal rule compares a fresh noisy vector with a noisy previous release, "
    "so dis sits at the sum of two noise floors and approximation wins about half the time"
))
def test_lbd_stationary_stream_mostly_approximates():
    values = {t: np.linspace(0, 2900, 15) for t in range(1, 101)}
    approx = 0
    for seed in range(50):
        st = UserState.create(1, 15, SCHEME, 1.0, 3, "LBD", seed=seed)
        approx += sum(r.strategy is Strategy.APPROXIMATE for r in run_stream(st, values, 100))
    assert approx / 5000 >= 0.95


def test_run_stream_length_determinism_and_gap():
    rows = {t: np.array([100.0, 700.0, 2500.0]) for t in range(1, 31) if t != 7}
    a = run_stream(state("LBA", seed=4), rows, 30)
    b = run_stream(state("LBA", seed=4), rows, 30)
    assert len(a) == 30 and [r.timestamp for r in a] == list(range(1, 31))
    assert a == b
    assert all(np.array_equal(x.released_vector.bits, y.released_vector.bits) for x, y in zip(a, b))
    # the gap day is encoded from zero readings, which only matters on publish
    st = state("LBU", seed=4)
    recs = run_stream(st, rows, 30)
    assert recs[6].timestamp == 7


def test_gap_day_uses_zero_readings():
    gap = {t: np.array([2900.0, 1500.0, 600.0]) for t in (1, 2, 4)}
    explicit = {**gap, 3: np.zeros(3)}
    for kind in ("LBU", "LBA"):
        a = run_stream(state(kind, seed=3), gap, 4)
        b = run_stream(state(kind, seed=3), explicit, 4)
        assert all(x.released_vector == y.released_vector for x, y in zip(a, b))


def test_dense_and_object_rows_agree():
    dense = {1: np.array([120.0, 2400.0, 900.0])}
    objs = {1: READINGS}
    a = run_stream(state("LBU", seed=2), dense, 1)
    b = run_stream(state("LBU", seed=2), objs, 1)
    assert a[0].released_vector == b[0].released_vector


def test_out_of_order_timestamps_rejected():
    st = state("LBU")
    process_timestamp(st, READINGS, 2)
    with pytest.raises(ValueError):
        process_timestamp(st, READINGS, 2)


def test_randomness_is_per_user_and_timestamp():
    c = encode_values([100.0, 200.0, 300.0], SCHEME)
    a = process_encoded(state("LBU", user=1), c, 1)
    b = process_encoded(state("LBU", user=2), c, 1)
    a2 = process_encoded(state("LBU", user=1), c, 1)
    assert a.released_vector == a2.released_vector
    assert a.released_vector != b.released_vector


def test_budget_fields_non_negative():
    st = state("LBA", seed=9)
    for rec in run_stream(st, {t: np.array([1.0, 2.0, 3.0]) * t * 50 for t in range(1, 21)}, 20):
        assert rec.spent_budget_t1 >= 0 and rec.spent_budget_t2 >= 0
        if rec.strategy is Strategy.APPROXIMATE:
            assert rec.spent_budget_t2 == 0
