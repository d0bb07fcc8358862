import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from delayq.stats import (
    cohens_d,
    holm_bonferroni,
    regularized_incomplete_beta,
    student_t_cdf,
    student_t_quantile,
    tost,
    tost_from_summary,
    welch_t,
)


class TestStudentT:
    def test_cdf_against_reference(self, rng):
        worst = 0.0
        for _ in range(300):
            t = float(rng.uniform(-30, 30) * rng.choice([1.0, 0.01]))
            df = float(rng.uniform(1, 300))
            worst = max(worst, abs(student_t_cdf(t, df) - sps.t.cdf(t, df)))
        assert worst <= 1e-12

    def test_cdf_symmetry(self):
        assert student_t_cdf(0.0, 7) == 0.5
        assert student_t_cdf(1.3, 9) + student_t_cdf(-1.3, 9) == pytest.approx(1.0, abs=1e-14)

    def test_quantile_inverts_cdf(self, rng):
        for _ in range(30):
            q = float(rng.uniform(0.01, 0.99))
            df = float(rng.uniform(2, 100))
            assert student_t_cdf(student_t_quantile(q, df), df) == pytest.approx(q, abs=1e-10)

    def test_incomplete_beta_edges(self):
        assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
        assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0
        with pytest.raises(ValueError):
            regularized_incomplete_beta(-1.0, 1.0, 0.5)

    def test_invalid_df(self):
        with pytest.raises(ValueError):
            student_t_cdf(1.0, 0.0)


class TestWelch:
    def test_identical_samples(self):
        a = [1.0, 2.0, 3.0, 4.0]
        res = welch_t(a, list(a))
        assert res.t == 0.0
        assert res.p == 1.0
        assert not res.degenerate

    def test_reference_example(self):
        res = welch_t([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
        ref = sps.ttest_ind([1, 2, 3, 4, 5], [2, 3, 4, 5, 6], equal_var=False)
        assert res.t == pytest.approx(ref.statistic, abs=1e-10)
        assert res.p == pytest.approx(ref.pvalue, abs=1e-10)

    def test_large_separation(self, rng):
        a = rng.normal(0, 1, 30)
        b = rng.normal(10, 1, 30)
        assert welch_t(a, b).p < 1e-6

    def test_hundred_random_pairs_match_reference(self, rng):
        for _ in range(100):
            a = rng.normal(0, 1 + rng.random(), size=int(rng.integers(3, 50)))
            b = rng.normal(rng.random(), 1 + rng.random(), size=int(rng.integers(3, 50)))
            res = welch_t(a, b)
            ref = sps.ttest_ind(a, b, equal_var=False)
            assert res.t == pytest.approx(ref.statistic, abs=1e-10)
            assert res.p == pytest.approx(ref.pvalue, abs=1e-10)
            assert res.df == pytest.approx(ref.df, abs=1e-8)

    def test_degenerate_conventions(self):
        equal = welch_t([2.0, 2.0, 2.0], [2.0, 2.0])
        assert equal.degenerate and equal.p == 1.0
        differ = welch_t([2.0, 2.0, 2.0], [3.0, 3.0])
        assert differ.degenerate and differ.p == 0.0

    def test_too_small_samples(self):
        with pytest.raises(ValueError):
            welch_t([1.0], [1.0, 2.0])


class TestHolm:
    def test_all_ones_no_rejections(self):
        reject, adjusted = holm_bonferroni([1.0, 1.0, 1.0], 0.05)
        assert not reject.any()
        assert np.all(adjusted == 1.0)

    def test_single_hypothesis_is_raw_test(self):
        reject, adjusted = holm_bonferroni([0.03], 0.05)
        assert reject.tolist() == [True]
        assert adjusted[0] == 0.03
        reject, _ = holm_bonferroni([0.06], 0.05)
        assert reject.tolist() == [False]

    def test_hand_executed_step_down(self):
        """p = (0.001, 0.02, 0.03, 0.04): 0.001*4 = 0.004 rejects, then
        0.02*3 = 0.06 > 0.05 stops the step-down immediately."""
        reject, adjusted = holm_bonferroni([0.001, 0.02, 0.03, 0.04], 0.05)
        assert reject.tolist() == [True, False, False, False]
        assert adjusted == pytest.approx([0.004, 0.06, 0.06, 0.06])

    def test_two_step_rejection_path(self):
        """With 0.012 in second place the step-down passes two hypotheses
        and is stopped exactly by 0.03*2 = 0.06 > 0.05."""
        reject, adjusted = holm_bonferroni([0.001, 0.012, 0.03, 0.04], 0.05)
        assert reject.tolist() == [True, True, False, False]
        assert adjusted == pytest.approx([0.004, 0.036, 0.06, 0.06])

    def test_unsorted_input_order_preserved(self):
        reject, adjusted = holm_bonferroni([0.04, 0.001, 0.03, 0.012], 0.05)
        assert reject.tolist() == [False, True, False, True]
        assert adjusted == pytest.approx([0.06, 0.004, 0.06, 0.036])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            holm_bonferroni([0.5, 1.2], 0.05)
        with pytest.raises(ValueError):
            holm_bonferroni([0.5], alpha=0.0)

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=12))
    def test_properties(self, p_values):
        reject, adjusted = holm_bonferroni(p_values, 0.05)
        order = np.argsort(np.asarray(p_values), kind="stable")
        sorted_adjusted = adjusted[order]
        assert np.all(np.diff(sorted_adjusted) >= -1e-15)  # monotone along sorted order
        sorted_reject = reject[order]
        if sorted_reject.any():
            last = np.where(sorted_reject)[0].max()
            assert sorted_reject[: last + 1].all()  # rejections form a prefix
        # every raw-Bonferroni rejection is a Holm rejection
        m = len(p_values)
        bonf = np.asarray(p_values) <= 0.05 / m
        assert np.all(reject[bonf])


class TestTost:
    def test_identical_samples_equivalent(self):
        a = [10.0, 11.0, 9.0, 10.5, 9.5, 10.2]
        res = tost(a, list(a), margin=2.0, alpha=0.05)
        assert res.equivalent
        assert res.p <= 0.05
        assert res.ci_low < 0 < res.ci_high

    def test_large_difference_not_equivalent(self, rng):
        a = rng.normal(0, 1, 20)
        b = rng.normal(50, 1, 20)
        res = tost(a, b, margin=5.0)
        assert not res.equivalent
        assert res.p > 0.5

    def test_summary_mode_reproduces_published_value(self):
        res = tost_from_summary(mean_diff=182.0, se=796.0, df=18.0, margin=404.0, alpha=0.05)
        assert res.p == pytest.approx(0.39, abs=0.02)
        assert not res.equivalent

    def test_ci_margin_consistency(self, rng):
        """Equivalence decision coincides with the (1-2a) CI inside the margin."""
        for _ in range(50):
            a = rng.normal(0, 1, 15)
            b = rng.normal(rng.uniform(-1, 1), 1, 15)
            margin = float(rng.uniform(0.2, 2.0))
            res = tost(a, b, margin=margin)
            inside = -margin < res.ci_low and res.ci_high < margin
            assert res.equivalent == inside

    def test_margin_validated(self):
        with pytest.raises(ValueError):
            tost([1.0, 2.0], [1.0, 2.0], margin=0.0)

    def test_degenerate_zero_variance(self):
        res = tost([2.0, 2.0, 2.0], [2.0, 2.0, 2.0], margin=1.0)
        assert res.degenerate and res.equivalent


class TestCohensD:
    def test_identical_samples_zero(self):
        assert cohens_d([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_one_pooled_sd_difference(self, rng):
        a = list(rng.normal(0, 1, 40))
        pooled = math.sqrt(np.var(a, ddof=1))
        b = [x + pooled for x in a]
        assert abs(cohens_d(b, a)) == pytest.approx(1.0, abs=1e-12)

    def test_against_reference_formula(self, rng):
        for _ in range(100):
            a = rng.normal(0, 2, int(rng.integers(3, 30)))
            b = rng.normal(1, 3, int(rng.integers(3, 30)))
            na, nb = len(a), len(b)
            pooled = math.sqrt(
                ((na - 1) * np.var(a, ddof=1) + (nb - 1) * np.var(b, ddof=1)) / (na + nb - 2)
            )
            expected = (np.mean(a) - np.mean(b)) / pooled
            assert cohens_d(a, b) == pytest.approx(expected, abs=1e-10)

    def test_zero_pooled_sd_rejected(self):
        with pytest.raises(ValueError):
            cohens_d([1.0, 1.0], [1.0, 1.0])
