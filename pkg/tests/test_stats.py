import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from mhmr_ita.errors import StatisticsError
from mhmr_ita.stats import significance_stars, student_t_sf, welch_t_test


class TestWelch:
    def test_identical_samples(self):
        r = welch_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert r.t == 0.0
        assert r.p == pytest.approx(1.0, abs=1e-12)

    def test_worked_example(self):
        r = welch_t_test([1, 2, 3], [4, 5, 6])
        assert r.t == pytest.approx(-3.674234614, abs=1e-3)
        assert r.df == pytest.approx(4.0, abs=1e-9)
        assert r.p == pytest.approx(0.0214, abs=1e-3)

    def test_scale_invariance(self):
        a = [1.2, 3.4, 2.2, 4.8]
        b = [2.0, 5.5, 3.1]
        base = welch_t_test(a, b)
        scaled = welch_t_test([10 * x for x in a], [10 * x for x in b])
        assert scaled.t == pytest.approx(base.t, rel=1e-12)
        assert scaled.p == pytest.approx(base.p, rel=1e-9)

    def test_matches_scipy(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = rng.normal(size=rng.integers(2, 30))
            b = rng.normal(loc=rng.normal(), size=rng.integers(2, 30))
            ours = welch_t_test(a, b)
            ref = sps.ttest_ind(a, b, equal_var=False)
            assert ours.t == pytest.approx(ref.statistic, rel=1e-12)
            assert ours.p == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-12)

    def test_degenerate_samples_rejected(self):
        with pytest.raises(StatisticsError):
            welch_t_test([1.0], [1.0, 2.0])
        with pytest.raises(StatisticsError):
            welch_t_test([2.0, 2.0], [3.0, 3.0])


class TestStudentTSf:
    @pytest.mark.parametrize(
        "x,df,expected",
        [
            # tabulated upper-tail quantiles
            (2.228138851986273, 10, 0.025),
            (1.812461122811676, 10, 0.05),
            (2.776445105198054, 4, 0.025),
            (6.313751514675043, 1, 0.05),
            (0.0, 7, 0.5),
        ],
    )
    def test_tabulated_quantiles(self, x, df, expected):
        assert student_t_sf(x, df) == pytest.approx(expected, abs=1e-10)

    @given(st.floats(-6, 6), st.floats(1.0, 50.0))
    @settings(max_examples=60, deadline=None)
    def test_matches_scipy_sf(self, x, df):
        assert student_t_sf(x, df) == pytest.approx(sps.t.sf(x, df), abs=1e-10)


class TestStars:
    @pytest.mark.parametrize(
        "p,expected",
        [
            (0.5, ""),
            (0.1, ""),
            (0.09, "*"),
            (0.05, "*"),
            (0.03, "**"),
            (0.01, "**"),
            (0.009, "***"),
            (0.001, "***"),
            (0.0005, "****"),
            (0.0, "****"),
        ],
    )
    def test_mapping(self, p, expected):
        assert significance_stars(p) == expected
