import math

import mpmath
import numpy as np
import pytest

from suppresskit.stats import (
    DegenerateSampleError,
    PairedSample,
    cohens_d_paired,
    mean_ci95,
    paired_t_test,
    student_t_cdf,
    student_t_two_sided_p,
)

mpmath.mp.dps = 50


def oracle_cdf(t: float, df: int) -> float:
    """High-precision Student-t CDF via the regularized incomplete beta."""
    x = mpmath.mpf(df) / (df + mpmath.mpf(t) ** 2)
    tail = 0.5 * mpmath.betainc(mpmath.mpf(df) / 2, mpmath.mpf(1) / 2, 0, x, regularized=True)
    return float(1 - tail) if t > 0 else float(tail)


class TestPairedSample:
    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            PairedSample([1.0, 2.0], [1.0])

    def test_too_short(self):
        with pytest.raises(ValueError):
            PairedSample([1.0], [0.0])

    def test_non_finite(self):
        with pytest.raises(ValueError):
            PairedSample([1.0, np.inf], [0.0, 0.0])


class TestPairedT:
    def test_known_differences(self):
        # a - b = [1, 1, 1, 3]: mean 1.5, sample sd 1, t = 3, df = 3.
        sample = PairedSample([1, 2, 3, 5], [0, 1, 2, 2])
        t, p, df = paired_t_test(sample)
        assert t == pytest.approx(3.0, abs=1e-12)
        assert df == 3
        assert p == pytest.approx(2 * (1 - oracle_cdf(3.0, 3)), abs=1e-9)
        assert p == pytest.approx(0.0577, abs=5e-5)

    def test_constant_shift_degenerate(self):
        a = np.array([0.3, 0.5, 0.7, 0.9])
        with pytest.raises(DegenerateSampleError):
            paired_t_test(PairedSample(a, a + 0.2))

    def test_swap_negates_t_keeps_p(self, rng):
        a = rng.random(12)
        b = rng.random(12)
        t1, p1, _ = paired_t_test(PairedSample(a, b))
        t2, p2, _ = paired_t_test(PairedSample(b, a))
        assert t1 == pytest.approx(-t2, abs=1e-12)
        assert p1 == pytest.approx(p2, abs=1e-15)


class TestCohensD:
    def test_known_value(self):
        assert cohens_d_paired(PairedSample([1, 2, 3, 5], [0, 1, 2, 2])) == pytest.approx(1.5)

    def test_equal_samples_error_not_zero(self):
        a = [0.1, 0.4, 0.9]
        with pytest.raises(DegenerateSampleError):
            cohens_d_paired(PairedSample(a, a))

    def test_scale_invariance(self, rng):
        a = rng.random(10)
        b = rng.random(10)
        d1 = cohens_d_paired(PairedSample(a, b))
        d2 = cohens_d_paired(PairedSample(2 * a, 2 * b))
        assert d1 == pytest.approx(d2, abs=1e-12)

    def test_t_equals_d_root_n(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 30))
            a = rng.random(n)
            b = rng.random(n)
            try:
                sample = PairedSample(a, b)
                t, _, _ = paired_t_test(sample)
                d = cohens_d_paired(sample)
            except DegenerateSampleError:
                continue
            assert abs(t - d * math.sqrt(n)) < 1e-9


class TestTCdf:
    def test_matches_high_precision_oracle(self):
        for df in range(1, 31):
            for t in np.linspace(-10, 10, 21):
                if t == 0:
                    continue
                assert student_t_cdf(float(t), df) == pytest.approx(
                    oracle_cdf(float(t), df), abs=1e-9
                )

    def test_p_range_and_zero_t(self):
        assert student_t_two_sided_p(0.0, 5) == 1.0
        for t in (0.1, 1.0, 4.0, 9.5):
            p = student_t_two_sided_p(t, 7)
            assert 0.0 < p < 1.0

    def test_cdf_at_zero_is_half(self):
        assert student_t_cdf(0.0, 3) == 0.5


class TestMeanCi:
    def test_constant_values(self):
        assert mean_ci95([0.5, 0.5, 0.5, 0.5]) == (0.5, 0.0)

    def test_two_point_quantile(self):
        mean, half = mean_ci95([0.0, 1.0])
        # t quantile at df=1: 12.7062047362..., sd = sqrt(1/2).
        assert mean == pytest.approx(0.5)
        assert half == pytest.approx(12.706204736174698 * math.sqrt(0.5) / math.sqrt(2), rel=1e-9)
        assert half == pytest.approx(6.3531, abs=2e-4)

    def test_large_n_approaches_normal_quantile(self, rng):
        values = rng.standard_normal(4000) * 0.2 + 0.7
        _, half = mean_ci95(values)
        expected = 1.959963984540054 * values.std(ddof=1) / math.sqrt(values.size)
        assert half == pytest.approx(expected, rel=2e-3)

    def test_needs_two_values(self):
        with pytest.raises(ValueError):
            mean_ci95([1.0])
