#!/usr/bin/env python3
"""
Noise Lab for DnIRB
===================

Thermal noise synthesis and characterisation:
1. Laplace and Gaussian noise models in 8-bit intensity units
2. Seeded samplers and analytic PDFs
3. add_noise: y = clip(x + v / 255, 0, 1)
4. A smoothing-residual noise extractor with histogram, maximum-likelihood
   fits and a Laplace-vs-Gaussian likelihood comparison
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import ndimage, stats

from dnirb.core import Tensor
from dnirb.errors import ConfigurationError, ImageRangeError, ShapeMismatchError

logger = logging.getLogger(__name__)

INTENSITY_MAX = 255.0
HISTOGRAM_RANGE = 40
DEFAULT_BLUR_SIGMA = 1.5
SMOOTHER_SIZE = 5


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean additive noise; subclasses fix the distribution"""

    kind = "base"

    @property
    def scale(self) -> float:
        raise NotImplementedError

    def variance(self) -> float:
        """Variance in squared 8-bit units"""
        raise NotImplementedError

    def sample_unit(self, rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
        raise NotImplementedError

    def distribution(self):
        raise NotImplementedError

    def label(self) -> str:
        raise NotImplementedError

    @staticmethod
    def parse(kind: str, scale: float) -> "NoiseModel":
        kind = kind.strip().lower()
        if kind == "laplace":
            return LaplaceNoise(b=float(scale))
        if kind == "gaussian":
            return GaussianNoise(sigma=float(scale))
        raise ConfigurationError(f"unknown noise model {kind!r}; expected 'laplace' or 'gaussian'")


@dataclass(frozen=True)
class LaplaceNoise(NoiseModel):
    """Laplace(0, b) with b in 8-bit units"""

    b: float = 12.5
    kind = "laplace"

    def __post_init__(self):
        if not self.b > 0 or not math.isfinite(self.b):
            raise ConfigurationError(f"Laplace scale b must be positive, got {self.b}")

    @property
    def scale(self) -> float:
        return self.b

    def variance(self) -> float:
        return 2.0 * self.b ** 2

    def sample_unit(self, rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
        # Inverse CDF with u ~ Uniform[-1/2, 1/2); 2|u| is kept below 1 so the log stays finite.
        u = rng.random(shape) - 0.5
        two_abs_u = np.minimum(2.0 * np.abs(u), np.nextafter(1.0, 0.0))
        return -self.b * np.sign(u) * np.log1p(-two_abs_u)

    def distribution(self):
        return stats.laplace(loc=0.0, scale=self.b)

    def label(self) -> str:
        return f"laplace b={self.b:g}"


@dataclass(frozen=True)
class GaussianNoise(NoiseModel):
    """Normal(0, sigma^2) with sigma in 8-bit units"""

    sigma: float = 25.0
    kind = "gaussian"

    def __post_init__(self):
        if not self.sigma > 0 or not math.isfinite(self.sigma):
            raise ConfigurationError(f"Gaussian sigma must be positive, got {self.sigma}")

    @property
    def scale(self) -> float:
        return self.sigma

    def variance(self) -> float:
        return self.sigma ** 2

    def sample_unit(self, rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
        return self.sigma * rng.standard_normal(shape)

    def distribution(self):
        return stats.norm(loc=0.0, scale=self.sigma)

    def label(self) -> str:
        return f"gaussian sigma={self.sigma:g}"


LAPLACE_SCALES = (5.0, 7.5, 12.5, 25.0)
GAUSSIAN_SIGMAS = (10.0, 15.0, 25.0, 50.0)


def laplace_sweep() -> List[NoiseModel]:
    return [LaplaceNoise(b) for b in LAPLACE_SCALES]


def gaussian_sweep() -> List[NoiseModel]:
    return [GaussianNoise(s) for s in GAUSSIAN_SIGMAS]


def sample_noise(model: NoiseModel, shape: Tuple[int, ...], rng_seed: int) -> Tensor:
    """i.i.d. noise in 8-bit units; identical seeds give identical tensors"""
    shape = tuple(int(d) for d in shape)
    if len(shape) != 4:
        raise ShapeMismatchError("sample_noise", ("n", "c", "h", "w"), shape)
    rng = np.random.default_rng(rng_seed)
    return Tensor(model.sample_unit(rng, shape))


def pdf(model: NoiseModel, v: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Analytic density at v (8-bit units); symmetric in v"""
    values = np.abs(np.asarray(v, dtype=np.float64))
    if isinstance(model, LaplaceNoise):
        density = np.exp(-values / model.b) / (2.0 * model.b)
    else:
        density = model.distribution().pdf(values)
    return float(density) if density.ndim == 0 else density


def log_likelihood(model: NoiseModel, residuals: np.ndarray) -> float:
    return float(np.sum(model.distribution().logpdf(np.asarray(residuals, dtype=np.float64))))


def _check_unit_range(op: str, values: np.ndarray) -> None:
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise ImageRangeError(f"{op}: clean input must lie in [0, 1], got [{values.min():.4g}, {values.max():.4g}]")


def add_noise(clean: Tensor, model: NoiseModel, seed: int) -> Tensor:
    """y = clip(x + v / 255, 0, 1) for v drawn from model"""
    _check_unit_range("add_noise", clean.data)
    noise = sample_noise(model, clean.shape, seed)
    return Tensor(np.clip(clean.data + noise.data / INTENSITY_MAX, 0.0, 1.0))


def analytic_noisy_psnr(model: NoiseModel) -> float:
    """Unclipped noisy-image PSNR 10*log10(255^2 / Var(v))"""
    return 10.0 * math.log10(INTENSITY_MAX ** 2 / model.variance())


# --- extraction ---------------------------------------------------------------

Smoother = Union[str, Callable[[np.ndarray], np.ndarray]]


def gaussian_smoother(image: np.ndarray) -> np.ndarray:
    # truncate=1.0 at sigma=1.5 gives a radius-2 (5x5) kernel
    return ndimage.gaussian_filter(image, sigma=DEFAULT_BLUR_SIGMA, truncate=1.0, mode="reflect")


def median_smoother(image: np.ndarray) -> np.ndarray:
    return ndimage.median_filter(image, size=SMOOTHER_SIZE, mode="reflect")


SMOOTHERS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "gaussian": gaussian_smoother,
    "median": median_smoother,
}


def _resolve_smoother(smoother: Smoother) -> Callable[[np.ndarray], np.ndarray]:
    if callable(smoother):
        return smoother
    try:
        return SMOOTHERS[smoother]
    except KeyError:
        raise ConfigurationError(f"unknown smoother {smoother!r}; choose from {sorted(SMOOTHERS)}")


def _as_plane(noisy: Union[Tensor, np.ndarray]) -> np.ndarray:
    if isinstance(noisy, Tensor):
        if noisy.n != 1 or noisy.c != 1:
            raise ShapeMismatchError("extract_noise", (1, 1, "h", "w"), noisy.shape, detail="single-channel image")
        return noisy.data[0, 0]
    plane = np.asarray(noisy, dtype=np.float64)
    if plane.ndim != 2:
        raise ShapeMismatchError("extract_noise", ("h", "w"), plane.shape, detail="single-channel image")
    return plane


def extract_residuals(noisy: Union[Tensor, np.ndarray], smoother: Smoother = "gaussian") -> np.ndarray:
    """(noisy - smoother(noisy)) * 255, flattened, in 8-bit units"""
    plane = _as_plane(noisy)
    smooth = _resolve_smoother(smoother)(plane)
    return ((plane - smooth) * INTENSITY_MAX).ravel()


@dataclass
class NoiseHistogram:
    """Unit-width bins centred on the integers -40..40"""

    edges: np.ndarray
    counts: np.ndarray
    total: int
    out_of_range: int = 0

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def probabilities(self) -> np.ndarray:
        if self.total == 0:
            return np.zeros_like(self.counts, dtype=np.float64)
        return self.counts / float(self.total)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"bin_center": self.centers, "probability": self.probabilities()})

    def pdf_table(self, models: Sequence[NoiseModel]) -> pd.DataFrame:
        """Histogram next to analytic densities, one column per model"""
        frame = self.to_frame()
        for model in models:
            frame[model.label()] = pdf(model, self.centers)
        return frame

    def to_csv(self, path: Union[str, Path], models: Optional[Sequence[NoiseModel]] = None) -> None:
        frame = self.pdf_table(models) if models else self.to_frame()
        frame.to_csv(path, index=False)
        logger.info(f"Wrote noise histogram ({self.total} samples) to {path}")


def histogram_of(residuals: np.ndarray) -> NoiseHistogram:
    edges = np.arange(-HISTOGRAM_RANGE - 0.5, HISTOGRAM_RANGE + 1.5, 1.0)
    counts, _ = np.histogram(residuals, bins=edges)
    total = int(counts.sum())
    return NoiseHistogram(edges=edges, counts=counts, total=total, out_of_range=int(residuals.size - total))


def extract_noise_histogram(noisy: Union[Tensor, np.ndarray], smoother: Smoother = "gaussian") -> NoiseHistogram:
    """Histogram of smoothing residuals over [-40, 40] in 8-bit units"""
    residuals = extract_residuals(noisy, smoother)
    histogram = histogram_of(residuals)
    if histogram.out_of_range:
        logger.debug(f"{histogram.out_of_range} residuals fell outside +/-{HISTOGRAM_RANGE}")
    return histogram


def fit_laplace_scale(residuals: np.ndarray) -> float:
    """Maximum-likelihood Laplace scale: mean absolute residual"""
    return float(np.mean(np.abs(residuals)))


def fit_gaussian_sigma(residuals: np.ndarray) -> float:
    """Maximum-likelihood zero-mean Gaussian sigma: RMS residual"""
    return float(np.sqrt(np.mean(np.square(residuals))))


@dataclass
class NoiseFit:
    laplace: LaplaceNoise
    gaussian: GaussianNoise
    laplace_log_likelihood: float
    gaussian_log_likelihood: float
    samples: int

    @property
    def preferred(self) -> str:
        return "laplace" if self.laplace_log_likelihood > self.gaussian_log_likelihood else "gaussian"

    def summary(self) -> Dict:
        return {
            "samples": self.samples,
            "laplace_b": self.laplace.b,
            "gaussian_sigma": self.gaussian.sigma,
            "laplace_log_likelihood": self.laplace_log_likelihood,
            "gaussian_log_likelihood": self.gaussian_log_likelihood,
            "preferred": self.preferred,
        }


def compare_noise_models(residuals: np.ndarray) -> NoiseFit:
    """Fit both models by maximum likelihood and score the residuals under each"""
    residuals = np.asarray(residuals, dtype=np.float64)
    if residuals.size == 0:
        raise ConfigurationError("cannot fit noise models to an empty residual set")
    laplace = LaplaceNoise(max(fit_laplace_scale(residuals), np.finfo(float).tiny))
    gaussian = GaussianNoise(max(fit_gaussian_sigma(residuals), np.finfo(float).tiny))
    fit = NoiseFit(
        laplace=laplace,
        gaussian=gaussian,
        laplace_log_likelihood=log_likelihood(laplace, residuals),
        gaussian_log_likelihood=log_likelihood(gaussian, residuals),
        samples=int(residuals.size),
    )
    logger.info(
        f"Noise fit over {fit.samples} residuals: b={laplace.b:.3f} (LL {fit.laplace_log_likelihood:.1f}), "
        f"sigma={gaussian.sigma:.3f} (LL {fit.gaussian_log_likelihood:.1f}) -> {fit.preferred}"
    )
    return fit
