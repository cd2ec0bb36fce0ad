#!/usr/bin/env python3
"""
Noise Commands
==============

1. add-noise  - corrupt images with seeded Laplace / Gaussian noise
2. noise-hist - residual histogram of noisy images with ML model fits
"""

import logging
from pathlib import Path
from typing import Tuple

import click
import numpy as np

from dnirb.commands import expand_inputs, noise_options, record_run
from dnirb.core import Tensor
from dnirb.data.image_io import GrayImage, load_image, save_image
from dnirb.errors import ConfigurationError
from dnirb.metrics import psnr
from dnirb.noise_lab import (
    SMOOTHERS,
    NoiseModel,
    add_noise,
    analytic_noisy_psnr,
    compare_noise_models,
    extract_residuals,
    histogram_of,
)

logger = logging.getLogger(__name__)


@click.command("add-noise")
@click.option("--in", "inputs", type=click.Path(exists=True, dir_okay=False, path_type=Path), multiple=True,
              required=True, help="Input image (PGM/PNG) or .txt manifest; repeatable")
@click.option("--out", "output", type=click.Path(path_type=Path), required=True,
              help="Output image, or a directory when several inputs are given")
@noise_options()
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def add_noise_command(ctx: click.Context, inputs: Tuple[Path, ...], output: Path, noise_model: str,
                      scale: float, seed: int) -> None:
    """Write y = clip(x + v) for seeded noise v."""
    model = NoiseModel.parse(noise_model, scale)
    sources = expand_inputs(inputs)
    if not sources:
        raise ConfigurationError("no input images")
    output = Path(output)
    to_directory = len(sources) > 1 or output.is_dir()
    if to_directory:
        output.mkdir(parents=True, exist_ok=True)

    written = []
    scores = []
    for index, source in enumerate(sources):
        clean = Tensor.from_array(load_image(source).to_unit())
        noisy = GrayImage.from_unit(add_noise(clean, model, seed + index).image())
        target = output / source.name if to_directory else output
        save_image(noisy, target)
        scores.append(psnr(noisy.to_unit(), clean.image()))
        written.append(target)
        logger.info(f"{source} -> {target}: {model.label()}, PSNR {scores[-1]:.2f} dB")

    expected = analytic_noisy_psnr(model)
    mean_psnr = float(np.mean(scores))
    click.echo(f"{len(written)} image(s) corrupted with {model.label()}: "
               f"noisy PSNR {mean_psnr:.2f} dB (analytic {expected:.2f} dB)")
    record_run(ctx, output, sources, written, extras={"noisy_psnr": mean_psnr, "analytic_psnr": expected})


@click.command("noise-hist")
@click.option("--in", "inputs", type=click.Path(exists=True, dir_okay=False, path_type=Path), multiple=True,
              required=True, help="Noisy image (PGM/PNG) or .txt manifest; repeatable")
@click.option("--out", "output", type=click.Path(dir_okay=False, path_type=Path), required=True,
              help="CSV of bin_center, probability and fitted densities")
@click.option("--smoother", type=click.Choice(sorted(SMOOTHERS)), default="gaussian", show_default=True,
              help="Smoothing filter whose residual is taken as noise")
@click.pass_context
def noise_hist_command(ctx: click.Context, inputs: Tuple[Path, ...], output: Path, smoother: str) -> None:
    """Histogram the smoothing residuals and compare Laplace / Gaussian fits."""
    sources = expand_inputs(inputs)
    if not sources:
        raise ConfigurationError("no input images")
    output = Path(output)
    residuals = np.concatenate([extract_residuals(load_image(p).to_unit(), smoother) for p in sources])
    histogram = histogram_of(residuals)
    fit = compare_noise_models(residuals)

    output.parent.mkdir(parents=True, exist_ok=True)
    histogram.to_csv(output, models=[fit.laplace, fit.gaussian])
    click.echo(
        f"{fit.samples} residuals ({histogram.out_of_range} outside the histogram): "
        f"Laplace b={fit.laplace.b:.3f} LL={fit.laplace_log_likelihood:.1f}, "
        f"Gaussian sigma={fit.gaussian.sigma:.3f} LL={fit.gaussian_log_likelihood:.1f}; "
        f"{fit.preferred} fits better"
    )
    record_run(ctx, output, sources, [output], extras=fit.summary())
