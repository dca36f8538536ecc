import numpy as np
import pytest
from scipy import special
from scipy import stats as sps

from ldpenergy import stats as kw


def test_reference_case():
    r = kw.kruskal_wallis([[1, 2, 3], [4, 5, 6]])
    assert r.statistic == pytest.approx(3.857142857, abs=1e-6)
    assert r.p_value == pytest.approx(0.0495346, abs=1e-6)
    assert r.degrees_of_freedom == 1 and not r.tie_corrected


def test_against_scipy_with_ties():
    rng = np.random.default_rng(0)
    for _ in range(50):
        groups = [rng.integers(0, 6, rng.integers(2, 40)) for _ in range(rng.integers(2, 5))]
        if len(np.unique(np.concatenate(groups))) < 2:
            continue
        ours = kw.kruskal_wallis(groups)
        ref = sps.kruskal(*groups)
        assert ours.statistic == pytest.approx(ref.statistic, abs=1e-8)
        assert ours.p_value == pytest.approx(ref.pvalue, abs=1e-8)


def test_counts_form_equals_expanded_form():
    rng = np.random.default_rng(1)
    for _ in range(30):
        counts = [rng.integers(0, 30, 7) for _ in range(2)]
        if min(c.sum() for c in counts) == 0:
            continue
        expanded = [np.repeat(np.arange(1, 8), c) for c in counts]
        if len(np.unique(np.concatenate(expanded))) < 2:
            continue
        a = kw.kruskal_wallis_counts(counts)
        b = kw.kruskal_wallis(expanded)
        assert a.statistic == pytest.approx(b.statistic, rel=1e-10, abs=1e-12)
        assert a.p_value == pytest.approx(b.p_value, rel=1e-10, abs=1e-14)


def test_identical_counts_give_p_one():
    c = np.array([5, 10, 0, 3.0])
    assert kw.kruskal_wallis_counts([c, c]).p_value == pytest.approx(1.0)


def test_degenerate_and_invalid_inputs():
    with pytest.raises(kw.DegenerateInputError):
        kw.kruskal_wallis([[2, 2], [2, 2, 2]])
    with pytest.raises(kw.DegenerateInputError):
        kw.kruskal_wallis_counts([[0, 3], [0, 4]])
    with pytest.raises(ValueError):
        kw.kruskal_wallis([[1, 2]])
    with pytest.raises(ValueError):
        kw.kruskal_wallis([[1], []])
    with pytest.raises(ValueError):
        kw.kruskal_wallis_counts([[1, 2], [1, 2, 3]])
    with pytest.raises(ValueError):
        kw.kruskal_wallis_counts([[1, -2], [1, 2]])
    with pytest.raises(ValueError):
        kw.kruskal_wallis_counts([[0, 0], [1, 2]])


def test_null_distribution_rarely_rejects():
    rng = np.random.default_rng(7)
    accept = sum(
        kw.kruskal_wallis([rng.normal(size=200), rng.normal(size=200)]).p_value > 0.05
        for _ in range(1000)
    )
    assert 0.925 <= accept / 1000 <= 0.975


@pytest.mark.parametrize("df", [1, 2, 3, 9, 30])
@pytest.mark.parametrize("x", [0.01, 0.5, 2.0, 9.0, 40.0, 150.0])
def test_chi2_sf_matches_reference(x, df):
    assert kw.chi2_sf(x, df) == pytest.approx(special.chdtrc(df, x), rel=1e-10, abs=1e-300)


def test_series_and_continued_fraction_agree_where_both_converge():
    for a, x in [(0.5, 1.2), (1.5, 2.4), (4.0, 5.0), (10.0, 11.5)]:
        assert 1 - kw._gamma_p_series(a, x) == pytest.approx(kw._gamma_q_cf(a, x), abs=1e-10)


def test_chi2_edges():
    assert kw.chi2_sf(0, 3) == 1.0
    with pytest.raises(ValueError):
        kw.chi2_sf(1.0, 0)
    with pytest.raises(ValueError):
        kw.gamma_q(0, 1)
    with pytest.raises(ValueError):
        kw.gamma_q(1, -1)


def test_rank_with_ties():
    ranks, sizes = kw.rank_with_ties(np.array([3, 1, 3, 2]))
    assert ranks.tolist() == [3.5, 1, 3.5, 2]
    assert sorted(sizes.tolist()) == [1, 1, 2]
