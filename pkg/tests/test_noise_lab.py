"""Tests for noise synthesis, densities and the residual noise extractor."""

import math

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_array_equal
from scipy import integrate

from dnirb.core import Tensor
from dnirb.errors import ConfigurationError, ImageRangeError
from dnirb.metrics import psnr
from dnirb.noise_lab import (
    GaussianNoise,
    LaplaceNoise,
    NoiseModel,
    add_noise,
    analytic_noisy_psnr,
    compare_noise_models,
    extract_noise_histogram,
    extract_residuals,
    pdf,
    sample_noise,
)


def mid_gray(size=128):
    return Tensor(np.full((1, 1, size, size), 0.5))


class TestNoiseModel:
    @pytest.mark.parametrize("scale", [0.0, -1.0, float("nan")])
    def test_non_positive_scale_rejected(self, scale):
        with pytest.raises(ConfigurationError):
            LaplaceNoise(scale)
        with pytest.raises(ConfigurationError):
            GaussianNoise(scale)

    def test_parse(self):
        assert NoiseModel.parse("Laplace", 12.5) == LaplaceNoise(12.5)
        assert NoiseModel.parse("gaussian", "25") == GaussianNoise(25.0)
        with pytest.raises(ConfigurationError):
            NoiseModel.parse("poisson", 1.0)

    def test_labels(self):
        assert LaplaceNoise(7.5).label() == "laplace b=7.5"
        assert GaussianNoise(50).label() == "gaussian sigma=50"


class TestSampling:
    def test_laplace_moments(self):
        samples = sample_noise(LaplaceNoise(12.5), (1, 1, 1000, 1000), rng_seed=0).data
        assert abs(samples.mean()) < 0.1
        assert samples.var() == pytest.approx(312.5, rel=0.02)

    def test_gaussian_moments(self):
        samples = sample_noise(GaussianNoise(25.0), (1, 1, 1000, 1000), rng_seed=0).data
        assert abs(samples.mean()) < 3 * 25.0 / 1000
        assert samples.var() == pytest.approx(625.0, rel=0.02)

    def test_same_seed_same_noise(self):
        a = sample_noise(LaplaceNoise(5.0), (2, 1, 8, 8), rng_seed=42)
        b = sample_noise(LaplaceNoise(5.0), (2, 1, 8, 8), rng_seed=42)
        c = sample_noise(LaplaceNoise(5.0), (2, 1, 8, 8), rng_seed=43)
        assert_array_equal(a.data, b.data)
        assert not np.array_equal(a.data, c.data)

    def test_laplace_samples_finite(self):
        assert np.isfinite(sample_noise(LaplaceNoise(25.0), (1, 1, 500, 500), rng_seed=1).data).all()


class TestPdf:
    def test_peak_values(self):
        assert pdf(LaplaceNoise(5.0), 0.0) == pytest.approx(0.1, abs=1e-15)
        assert pdf(GaussianNoise(10.0), 0.0) == pytest.approx(1.0 / (10.0 * math.sqrt(2 * math.pi)), rel=1e-12)
        assert pdf(GaussianNoise(10.0), 0.0) == pytest.approx(0.039894, abs=1e-6)

    @pytest.mark.parametrize("model", [LaplaceNoise(5.0), GaussianNoise(10.0)])
    def test_symmetric(self, model):
        v = np.linspace(0.0, 60.0, 121)
        assert_array_equal(pdf(model, v), pdf(model, -v))

    @pytest.mark.parametrize("model", [LaplaceNoise(5.0), LaplaceNoise(25.0), GaussianNoise(10.0), GaussianNoise(50.0)])
    def test_integrates_to_one(self, model):
        # split at the Laplace cusp
        halves = [integrate.quad(lambda v: pdf(model, v), lo, hi)[0] for lo, hi in ((-np.inf, 0.0), (0.0, np.inf))]
        mass = sum(halves)
        assert mass == pytest.approx(1.0, abs=1e-6)


class TestAddNoise:
    def test_tiny_scale_is_identity(self, rng):
        clean = Tensor(rng.uniform(size=(1, 1, 16, 16)))
        noisy = add_noise(clean, LaplaceNoise(1e-9), seed=0)
        assert np.abs(noisy.data - clean.data).max() < 1e-9

    def test_output_in_unit_range(self, rng):
        clean = Tensor(rng.uniform(size=(1, 1, 32, 32)))
        noisy = add_noise(clean, GaussianNoise(50.0), seed=3).data
        assert noisy.min() >= 0.0 and noisy.max() <= 1.0

    def test_out_of_range_input_rejected(self):
        with pytest.raises(ImageRangeError):
            add_noise(Tensor(np.full((1, 1, 4, 4), 1.5)), GaussianNoise(10.0), seed=0)

    @pytest.mark.parametrize(
        "model, expected",
        [(GaussianNoise(25.0), 20.17), (LaplaceNoise(25.0), 17.16)],
    )
    def test_noisy_psnr_matches_analytic(self, model, expected):
        clean = mid_gray(256)
        noisy = add_noise(clean, model, seed=0)
        assert analytic_noisy_psnr(model) == pytest.approx(expected, abs=0.01)
        assert psnr(noisy.data, clean.data) == pytest.approx(analytic_noisy_psnr(model), abs=0.6)

    def test_seeded(self):
        clean = mid_gray(16)
        assert_array_equal(add_noise(clean, LaplaceNoise(12.5), 9).data, add_noise(clean, LaplaceNoise(12.5), 9).data)


class TestExtraction:
    def test_constant_image_single_bin(self):
        histogram = extract_noise_histogram(Tensor(np.full((1, 1, 20, 20), 0.3)))
        assert histogram.counts.sum() == histogram.total == 400
        assert histogram.counts[len(histogram.counts) // 2] == 400
        assert histogram.centers[len(histogram.centers) // 2] == 0.0

    def test_histogram_normalised(self):
        noisy = add_noise(mid_gray(64), LaplaceNoise(7.5), seed=2)
        histogram = extract_noise_histogram(noisy, smoother="median")
        assert len(histogram.counts) == 81
        assert histogram.probabilities().sum() == pytest.approx(1.0, abs=1e-12)

    def test_outliers_counted(self):
        noisy = add_noise(mid_gray(64), GaussianNoise(50.0), seed=4)
        histogram = extract_noise_histogram(noisy)
        assert histogram.out_of_range > 0
        assert histogram.total + histogram.out_of_range == 64 * 64

    def test_laplace_fit_recovers_scale_and_wins(self):
        noisy = add_noise(mid_gray(128), LaplaceNoise(12.5), seed=5)
        fit = compare_noise_models(extract_residuals(noisy))
        assert fit.laplace.b == pytest.approx(12.5, rel=0.15)
        assert fit.laplace_log_likelihood > fit.gaussian_log_likelihood
        assert fit.preferred == "laplace"

    def test_unknown_smoother(self):
        with pytest.raises(ConfigurationError):
            extract_residuals(np.zeros((4, 4)), smoother="bm3d")

    def test_empty_residuals_rejected(self):
        with pytest.raises(ConfigurationError):
            compare_noise_models(np.array([]))

    def test_csv_carries_model_columns(self, tmp_path):
        noisy = add_noise(mid_gray(32), LaplaceNoise(5.0), seed=0)
        residuals = extract_residuals(noisy)
        fit = compare_noise_models(residuals)
        path = tmp_path / "hist.csv"
        extract_noise_histogram(noisy).to_csv(path, models=[fit.laplace, fit.gaussian])
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["bin_center", "probability", fit.laplace.label(), fit.gaussian.label()]
        assert len(frame) == 81
