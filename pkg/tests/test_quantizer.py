import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldpenergy.quantizer import (
    ApplianceReading,
    EncodedVector,
    QuantizationScheme,
    build_combined_vector,
    build_scheme,
    encode_level,
    encode_levels,
    encode_values,
    map_reading,
    map_readings,
)


def test_equal_width_boundaries():
    assert build_scheme(10, 3000).boundaries == tuple(float(x) for x in range(0, 3001, 300))
    assert build_scheme(5, 3000).boundaries == (0.0, 600.0, 1200.0, 1800.0, 2400.0, 3000.0)


def test_non_increasing_boundaries_rejected():
    bad = [0, 5, 10, 10, 20, 25, 30, 35, 40, 45, 50]
    with pytest.raises(ValueError):
        build_scheme(10, 50, bad)
    with pytest.raises(ValueError):
        QuantizationScheme((0.0, 2.0, 1.0))


@pytest.mark.parametrize("bad", [(1.0, 2.0, 3.0), (0.0, 1.0), (0.0, 1.0, float("inf"))])
def test_scheme_validation(bad):
    with pytest.raises(ValueError):
        QuantizationScheme(bad)


def test_build_scheme_argument_checks():
    with pytest.raises(ValueError):
        build_scheme(1, 3000)
    with pytest.raises(ValueError):
        build_scheme(3, 0)
    with pytest.raises(ValueError):
        build_scheme(2, 10, [0, 5, 9])


def test_midpoints():
    np.testing.assert_allclose(build_scheme(10, 3000).midpoints(), np.arange(150, 3000, 300))


@pytest.mark.parametrize("value,level", [(450, 2), (0, 1), (3000, 10), (300, 1), (300.0001, 2), (1e-9, 1)])
def test_map_reading(value, level):
    assert map_reading(value, build_scheme(10, 3000)) == level


def test_map_reading_overflow_clamps_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        assert map_reading(3500, build_scheme(10, 3000)) == 10
    assert "clamped" in caplog.text


def test_map_reading_rejects_negative_and_nan():
    s = build_scheme(10, 3000)
    with pytest.raises(ValueError):
        map_reading(-1, s)
    with pytest.raises(ValueError):
        map_readings([1.0, float("nan")], s)


@given(st.floats(min_value=0, max_value=3000, allow_nan=False))
def test_map_reading_lands_in_its_range(v):
    s = build_scheme(10, 3000)
    lv = map_reading(v, s)
    b = s.boundaries
    assert 1 <= lv <= 10
    if v > 0:
        assert b[lv - 1] < v <= b[lv]


def test_encode_level_positions():
    assert encode_level(1, 10).tolist() == [0] * 9 + [1]
    assert encode_level(2, 10).tolist() == [0] * 8 + [1, 0]
    assert encode_level(3, 3).tolist() == [1, 0, 0]
    with pytest.raises(ValueError):
        encode_level(0, 3)
    with pytest.raises(ValueError):
        encode_level(4, 3)


def test_encode_levels_matches_scalar_form():
    levels = [1, 3, 2]
    flat = np.concatenate([encode_level(l, 3) for l in levels])
    assert encode_levels(levels, 3).tolist() == flat.tolist()


def test_combined_vector_examples():
    s = build_scheme(3, 3000)
    v = build_combined_vector([ApplianceReading(1, 0.0), ApplianceReading(2, 1500.0)], s, 2)
    assert v.bits.tolist() == [0, 0, 1, 0, 1, 0]
    v = build_combined_vector([ApplianceReading(1, 2999.0)], s, 2)
    assert v.bits.tolist() == [1, 0, 0, 0, 0, 1]
    with pytest.raises(ValueError):
        build_combined_vector([ApplianceReading(3, 1.0)], s, 2)
    with pytest.raises(ValueError):
        build_combined_vector([ApplianceReading(1, 1.0), ApplianceReading(1, 2.0)], s, 2)


@settings(max_examples=50)
@given(st.lists(st.floats(min_value=0, max_value=3000, allow_nan=False), min_size=1, max_size=8),
       st.integers(2, 12))
def test_encoding_roundtrip(values, d):
    s = build_scheme(d, 3000)
    v = encode_values(values, s)
    assert len(v) == d * len(values)
    assert np.all(v.blocks().sum(axis=1) == 1)
    assert v.levels().tolist() == map_readings(values, s).tolist()


def test_encoded_vector_validation_and_equality():
    with pytest.raises(ValueError):
        EncodedVector(np.zeros(5, dtype=np.uint8), 2, 3)
    a = EncodedVector(np.array([0, 1, 1, 0], dtype=np.uint8), 2, 2)
    assert a == a.copy()
    assert a != EncodedVector(np.array([1, 0, 1, 0], dtype=np.uint8), 2, 2)
    with pytest.raises(ValueError):
        EncodedVector(np.array([1, 1, 1, 0], dtype=np.uint8), 2, 2).levels()
