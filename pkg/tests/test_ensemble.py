import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isalib import (
    AllWeightsZero,
    DegenerateEnsemble,
    DomainError,
    WeightedEnsemble,
    estimate_r,
    gaussian_mismatch_r,
    self_normalize,
    weighted_covariance,
    weighted_mean,
)
from isalib.ensemble import read_ensemble_csv, write_ensemble_csv


class TestSelfNormalize:
    def test_equal_weights(self):
        np.testing.assert_allclose(self_normalize([0.0, 0.0]), [0.5, 0.5])

    def test_shift_invariance_large_negative(self):
        np.testing.assert_allclose(self_normalize([-1000.0, -1000.0]), [0.5, 0.5])

    def test_zero_likelihood_sample(self):
        np.testing.assert_allclose(self_normalize([0.0, -np.inf]), [1.0, 0.0])

    def test_all_zero_raises(self):
        with pytest.raises(AllWeightsZero):
            self_normalize([-np.inf, -np.inf])

    def test_nan_rejected(self):
        with pytest.raises(DomainError):
            self_normalize([0.0, np.nan])

    @given(
        st.lists(st.floats(-50, 50), min_size=1, max_size=40),
        # moderate shifts: huge ones destroy input precision before the
        # normalization ever sees the values
        st.floats(-1e3, 1e3),
    )
    @settings(max_examples=200)
    def test_constant_shift_invariance(self, logs, shift):
        base = self_normalize(logs)
        shifted = self_normalize(np.asarray(logs) + shift)
        np.testing.assert_allclose(shifted, base, rtol=1e-12, atol=1e-15)

    @given(st.lists(st.floats(-700, 50), min_size=1, max_size=40))
    def test_sums_to_one(self, logs):
        assert abs(math.fsum(self_normalize(logs)) - 1.0) <= 1e-12


class TestEstimateR:
    def test_uniform_weights_r_is_one(self):
        report = estimate_r([0.25] * 4)
        assert report.r == pytest.approx(1.0)
        assert report.n_eff == pytest.approx(4.0)

    def test_degenerate_weight_r_is_n(self):
        report = estimate_r([1.0, 0.0, 0.0, 0.0])
        assert report.r == pytest.approx(4.0)
        assert report.n_eff == pytest.approx(1.0)

    def test_half_support(self):
        # N * sum(w^2) = 4 * (0.25 + 0.25) = 2
        report = estimate_r([0.5, 0.5, 0.0, 0.0])
        assert report.r == pytest.approx(2.0)
        assert report.n_eff == pytest.approx(2.0)

    @given(st.lists(st.floats(-30, 5), min_size=1, max_size=50))
    @settings(max_examples=200)
    def test_bounds_and_exact_product(self, logs):
        w = self_normalize(logs)
        report = estimate_r(w)
        assert 1.0 <= report.r <= report.n
        assert report.n_eff * report.r == pytest.approx(report.n, abs=1e-9)

    def test_unnormalized_rejected(self):
        with pytest.raises(DomainError):
            estimate_r([0.5, 0.3])


class TestMoments:
    def test_weighted_mean_two_points(self):
        ens = WeightedEnsemble.uniform([[0.0, 0.0], [2.0, 0.0]])
        np.testing.assert_allclose(weighted_mean(ens), [1.0, 0.0])

    def test_point_mass(self):
        ens = WeightedEnsemble.uniform([[3.0, 7.0]])
        np.testing.assert_allclose(weighted_mean(ens), [3.0, 7.0])

    def test_uniform_weights_match_population_moments(self):
        rng = np.random.default_rng(3)
        samples = rng.standard_normal((500, 3))
        ens = WeightedEnsemble.uniform(samples)
        np.testing.assert_allclose(
            weighted_mean(ens), samples.mean(axis=0), atol=1e-12
        )
        pop_cov = np.cov(samples.T, bias=True)
        np.testing.assert_allclose(
            weighted_covariance(ens), pop_cov, atol=1e-10
        )

    def test_covariance_rank_deficient_gets_jitter(self):
        ens = WeightedEnsemble.uniform([[0.0, 0.0], [2.0, 0.0], [1.0, 0.0]])
        cov = weighted_covariance(ens)
        assert cov[0, 0] == pytest.approx(2.0 / 3.0)
        # second coordinate has zero spread: repaired with a small positive jitter
        assert 0.0 < cov[1, 1] < 1e-6
        np.linalg.cholesky(cov)

    def test_inflation_scales_linearly(self):
        rng = np.random.default_rng(4)
        ens = WeightedEnsemble.uniform(rng.standard_normal((100, 2)))
        np.testing.assert_allclose(
            weighted_covariance(ens, inflation=2.0),
            2.0 * weighted_covariance(ens, inflation=1.0),
            rtol=1e-12,
        )

    def test_single_effective_sample_degenerate(self):
        ens = WeightedEnsemble.from_log_weights(
            [[0.0, 0.0], [1.0, 1.0]], [0.0, -np.inf]
        )
        with pytest.raises(DegenerateEnsemble):
            weighted_covariance(ens)

    def test_collapse_guard_threshold(self):
        # n_eff = 2 < n_theta + 1 = 3 in dimension 2
        ens = WeightedEnsemble.from_log_weights(
            [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            [0.0, 0.0, -np.inf, -np.inf],
        )
        with pytest.raises(DegenerateEnsemble):
            weighted_covariance(ens)


class TestGaussianMismatchR:
    def test_matched_covariance(self):
        assert gaussian_mismatch_r(0.0, 7) == pytest.approx(1.0)

    def test_small_mismatch_2d(self):
        assert gaussian_mismatch_r(0.1, 2) == pytest.approx(1.21 / 1.2)

    def test_power_law_in_dimension(self):
        expected = (1.1 / math.sqrt(1.2)) ** 10
        assert gaussian_mismatch_r(0.1, 10) == pytest.approx(expected)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            gaussian_mismatch_r(-0.5, 2)

    @pytest.mark.parametrize("eps,dim", [(0.1, 2), (0.1, 10)])
    def test_monte_carlo_agreement(self, eps, dim):
        rng = np.random.default_rng(1234 + dim)
        n = 10**5
        x = rng.standard_normal((n, dim)) * math.sqrt(1.0 + eps)
        sq = np.einsum("ij,ij->i", x, x)
        log_w = -0.5 * sq - (-0.5 * sq / (1.0 + eps))
        report = estimate_r(self_normalize(log_w))
        expected = gaussian_mismatch_r(eps, dim)
        assert report.r == pytest.approx(expected, rel=0.05)


class TestCsvRoundTrip:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        ens = WeightedEnsemble.from_log_weights(
            rng.standard_normal((30, 3)), rng.standard_normal(30)
        )
        path = tmp_path / "ens.csv"
        write_ensemble_csv(ens, path)
        back = read_ensemble_csv(path)
        np.testing.assert_allclose(back.samples, ens.samples, rtol=1e-15)
        np.testing.assert_allclose(back.weights, ens.weights, rtol=1e-12)

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(DomainError):
            read_ensemble_csv(path)
