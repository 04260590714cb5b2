"""Closed-form analytics, frozen against independent oracles and the worked
examples' reference values."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from noisefence.analytic import (
    AutozoomNoiseParams,
    NesNoiseParams,
    RatioParams,
    RepeatParams,
    analysis_rows,
    autozoom_variance,
    pdf_a,
    prob_a_negative,
    qc_ratio,
    quantized_z2,
    repeated_query_n,
    sigma_z_sq,
    snr_db,
    snr_nes,
)
from noisefence.core import DomainError, RngStream


class TestSigmaZSq:
    def test_equal_values(self):
        p = NesNoiseParams(sigma=0.01, beta=1e-3, f_minus=1e-3, f_plus=1e-3)
        assert sigma_z_sq(p) == pytest.approx(200.0)

    def test_worked_example(self):
        p = NesNoiseParams(sigma=1e-3, beta=1e-3, f_minus=0.105, f_plus=0.095)
        assert sigma_z_sq(p) == pytest.approx(2.015e-4, rel=1e-3)

    def test_validation(self):
        with pytest.raises(DomainError):
            NesNoiseParams(sigma=0.01, beta=0.0, f_minus=0.1, f_plus=0.1)
        with pytest.raises(DomainError):
            NesNoiseParams(sigma=0.01, beta=1e-3, f_minus=0.0, f_plus=0.1)


class TestSnr:
    def test_mnist_row(self):
        # mean F_t 4e-4 with variation 5e-6 at sigma=0.01
        p = NesNoiseParams(
            sigma=0.01, beta=1e-3, f_minus=4e-4 + 2.5e-6, f_plus=4e-4 - 2.5e-6
        )
        exact = snr_nes(p)["exact"]
        assert exact == pytest.approx(1.25e-7, rel=0.02)
        assert snr_db(exact) == pytest.approx(-69.0, abs=0.2)

    def test_cifar_row(self):
        # |df| = 2e-4 around mean F_t = 1e-3; the reference 2.0e-4 is the
        # symmetric reduction df^2/(2 sigma^2), so the asymmetric exact form
        # lands within 25%
        p = NesNoiseParams(sigma=0.01, beta=1e-3, f_minus=1e-3 + 1e-4, f_plus=1e-3 - 1e-4)
        assert snr_nes(p)["exact"] == pytest.approx(2.0e-4, rel=0.25)

    def test_zero_sigma_sentinel(self):
        p = NesNoiseParams(sigma=0.0, beta=1e-3, f_minus=0.1, f_plus=0.1)
        assert snr_nes(p)["exact"] == math.inf

    def test_bound_dominates_exact(self):
        # Lemma 1: exact <= 2 L^2 beta^2 / sigma^2 with L the Lipschitz bound
        p = NesNoiseParams(sigma=1e-3, beta=1e-3, f_minus=0.105, f_plus=0.095, lipschitz=10.0)
        out = snr_nes(p)
        assert out["exact"] <= out["bound"]

    def test_db_of_zero(self):
        assert snr_db(0.0) == -math.inf


class TestQcRatio:
    CONSTANTS = {"a_lambda": 0.2, "eta_over_v0": 0.01, "epsilon": 0.01}

    @pytest.mark.parametrize(
        "snr,expected",
        [(1.25e-7, 8.7e6), (2.0e-4, 5.5e3), (1.25e-11, 8.7e10)],
    )
    def test_headline_numbers(self, snr, expected):
        assert qc_ratio(RatioParams(snr=snr, **self.CONSTANTS)) == pytest.approx(
            expected, rel=0.05
        )

    def test_approaches_one_at_high_snr(self):
        assert qc_ratio(RatioParams(snr=1e12, **self.CONSTANTS)) == pytest.approx(1.0, rel=1e-3)

    def test_at_least_one(self):
        for snr in (1e-8, 1e-4, 1e0, 1e6):
            assert qc_ratio(RatioParams(snr=snr, **self.CONSTANTS)) >= 1.0

    def test_inverse_snr_scaling_low_snr(self):
        # R ~ C/SNR: doubling sigma (quartering SNR) multiplies R by ~4
        r1 = qc_ratio(RatioParams(snr=1e-7, **self.CONSTANTS))
        r2 = qc_ratio(RatioParams(snr=0.25e-7, **self.CONSTANTS))
        assert r2 / r1 == pytest.approx(4.0, rel=0.01)

    def test_validation(self):
        with pytest.raises(DomainError):
            RatioParams(a_lambda=0.2, eta_over_v0=1.0, epsilon=0.01, snr=1.0)
        with pytest.raises(DomainError):
            RatioParams(a_lambda=0.2, eta_over_v0=0.01, epsilon=0.5, snr=1.0)
        with pytest.raises(DomainError):
            RatioParams(a_lambda=0.2, eta_over_v0=0.01, epsilon=0.01, snr=0.0)


class TestRepeatedQueryN:
    MNIST = {"f_t": 4e-4, "beta": 1e-3, "a": 1.0, "epsilon": 0.3}

    def test_feasible_small_sigma(self):
        out = repeated_query_n(RepeatParams(sigma=1e-6, **self.MNIST))
        assert out["feasible"] and out["n"] == 4

    def test_feasible_medium_sigma(self):
        out = repeated_query_n(RepeatParams(sigma=5e-6, **self.MNIST))
        assert out["feasible"] and abs(out["n"] - 182) <= 1

    @pytest.mark.parametrize("sigma", [1e-4, 1e-3, 1e-2])
    def test_infeasible_large_sigma(self, sigma):
        out = repeated_query_n(RepeatParams(sigma=sigma, **self.MNIST))
        assert not out["feasible"] and out["n"] is None

    def test_zero_sigma(self):
        out = repeated_query_n(RepeatParams(sigma=0.0, **self.MNIST))
        assert out == {"feasible": True, "n": 0, "sigma_z_sq": 0.0}


class TestPdfA:
    A, BETA, SIGMA_Z = 100.08, 1e-3, math.sqrt(2.015e-4)

    def test_integrates_to_one(self):
        half_width = 20 * self.SIGMA_Z / self.BETA
        total, err = integrate.quad(
            pdf_a,
            self.A - half_width,
            self.A + half_width,
            args=(self.A, self.BETA, self.SIGMA_Z),
        )
        assert total == pytest.approx(1.0, abs=1e-3)
        assert err < 1e-6

    def test_mode_near_a(self):
        width = self.SIGMA_Z / self.BETA
        xs = np.linspace(self.A - 5 * width, self.A + 5 * width, 4001)
        ys = [pdf_a(x, self.A, self.BETA, self.SIGMA_Z) for x in xs]
        assert abs(xs[int(np.argmax(ys))] - self.A) <= width

    def test_matches_sampled_histogram(self):
        rng = RngStream(0)
        z = rng.normal(1.0, self.SIGMA_Z, 1_000_000)
        samples = self.A + np.log(z) / self.BETA
        width = self.SIGMA_Z / self.BETA
        edges = np.linspace(self.A - 4 * width, self.A + 4 * width, 41)
        observed, _ = np.histogram(samples, bins=edges)
        expected = np.array(
            [
                integrate.quad(pdf_a, lo, hi, args=(self.A, self.BETA, self.SIGMA_Z))[0]
                for lo, hi in zip(edges[:-1], edges[1:])
            ]
        )
        expected *= observed.sum() / expected.sum()
        chi2 = stats.chisquare(observed, expected)
        assert chi2.pvalue > 0.01

    def test_domain(self):
        with pytest.raises(DomainError):
            pdf_a(0.0, 1.0, 0.0, 0.1)
        with pytest.raises(DomainError):
            pdf_a(0.0, 1.0, 1e-3, 0.0)


class TestProbANegative:
    def test_half_probability_regime(self):
        # a=1, beta=1e-3, F_t=0.1, sigma=1e-3 -> sigma_Z^2 = 2e-4
        assert prob_a_negative(1.0, 1e-3, math.sqrt(2e-4)) == pytest.approx(0.472, abs=2e-3)

    def test_tiny_noise_is_zero(self):
        assert prob_a_negative(1.0, 1e-3, math.sqrt(2e-10)) < 1e-100

    def test_gaussian_method(self):
        sigma_z = math.sqrt(2e-4)
        expected = stats.norm.cdf(-1.0 * 1e-3 / sigma_z)
        assert prob_a_negative(1.0, 1e-3, sigma_z, method="gaussian") == pytest.approx(expected)

    def test_zero_sigma_z(self):
        assert prob_a_negative(1.0, 1e-3, 0.0) == 0.0
        assert prob_a_negative(0.0, 1e-3, 0.0) == 0.5
        assert prob_a_negative(-1.0, 1e-3, 0.0) == 1.0

    def test_unknown_method(self):
        with pytest.raises(DomainError):
            prob_a_negative(1.0, 1e-3, 0.1, method="laplace")


class TestAutozoomVariance:
    def test_small_f_example(self):
        p = AutozoomNoiseParams(
            sigma=0.01, beta=1e-3, f_max_x=1e-3, f_max_xb=1e-3, f_t_x=1e-3, f_t_xb=1e-3
        )
        assert autozoom_variance(p)["var_a"] == pytest.approx(4e8)

    def test_f_point_one_example(self):
        p = AutozoomNoiseParams(
            sigma=1e-3, beta=1e-3, f_max_x=0.1, f_max_xb=0.1, f_t_x=0.1, f_t_xb=0.1
        )
        assert autozoom_variance(p)["var_a"] == pytest.approx(400.0)

    def test_snr_bound(self):
        p = AutozoomNoiseParams(
            sigma=1e-3, beta=1e-3, f_max_x=0.1, f_max_xb=0.1, f_t_x=0.1, f_t_xb=0.1,
            lipschitz=2.0,
        )
        assert autozoom_variance(p)["snr_bound"] == pytest.approx(
            2.0**2 * 1e-6 / (2 * 1e-6)
        )


class TestQuantizedZ2:
    def test_shared_level_example(self):
        assert quantized_z2(0.30, 0.31, 2) == pytest.approx(0.9611, abs=2e-4)

    def test_equal_inputs_give_one(self):
        assert quantized_z2(0.3, 0.3, 2) == pytest.approx(1.0)

    def test_different_levels_rejected(self):
        with pytest.raises(DomainError):
            quantized_z2(0.3, 0.6, 2)


class TestAnalysisRows:
    KW = {
        "beta": 1e-3,
        "mean_dft": 5e-6,
        "mean_ft": 4e-4,
        "a_lambda": 0.2,
        "eta_over_v0": 0.01,
        "epsilon": 0.01,
    }

    def test_zero_sigma_sentinel_row(self):
        row = analysis_rows([0.0], **self.KW)[0]
        assert row["qc_ratio"] == 1.0
        assert row["snr_exact"] == math.inf
        assert row["repeat_n"] == 0

    def test_mnist_headline_row(self):
        row = analysis_rows([0.01], **self.KW)[0]
        assert row["qc_ratio"] == pytest.approx(8.7e6, rel=0.05)
        assert row["snr_db"] == pytest.approx(-69.0, abs=0.3)

    def test_qc_monotone_in_sigma(self):
        rows = analysis_rows([1e-4, 1e-3, 1e-2, 1e-1], **self.KW)
        ratios = [r["qc_ratio"] for r in rows]
        assert ratios == sorted(ratios)

    def test_infeasible_repeat_marker(self):
        row = analysis_rows([0.01], **self.KW)[0]
        assert row["repeat_n"] == "inf"

    def test_doubling_sigma_quadruples_qc(self):
        r1, r2 = analysis_rows([1e-2, 2e-2], **self.KW)
        assert r2["qc_ratio"] / r1["qc_ratio"] == pytest.approx(4.0, rel=0.05)
