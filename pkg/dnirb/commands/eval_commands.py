#!/usr/bin/env python3
"""
Evaluation Commands
===================

1. denoise - run a checkpoint over images, optionally writing comparison triplets
2. eval    - PSNR sweeps over noise scales (laplace / gaussian) or block counts
"""

import logging
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import click

from dnirb.checkpoint import checkpoint_checksum, load_checkpoint
from dnirb.commands import expand_inputs, record_run, worker_threads
from dnirb.commands.train_commands import load_dataset
from dnirb.core import Tensor
from dnirb.data.image_io import GrayImage, load_image, save_image
from dnirb.data.patches import AugmentationSet, PatchSpec
from dnirb.data.training_pairs import build_training_pairs
from dnirb.errors import ConfigurationError
from dnirb.evaluation import DEFAULT_BLOCK_COUNTS, run_block_sweep, run_noise_sweep, write_triplet
from dnirb.network import NetworkConfig, NetworkParams, denoise
from dnirb.noise_lab import NoiseModel, add_noise, gaussian_sweep, laplace_sweep
from dnirb.trainer import TrainConfig

logger = logging.getLogger(__name__)

SWEEPS = ("laplace", "gaussian", "blocks")


def parse_list(value: Optional[str], cast: Callable, name: str) -> Optional[List]:
    """Comma-separated option values, e.g. '5,7.5,12.5'"""
    if value is None or value == "":
        return None
    try:
        return [cast(item) for item in str(value).split(",") if item.strip()]
    except ValueError as e:
        raise ConfigurationError(f"--{name}: cannot parse {value!r} ({e})") from e


def load_params(checkpoint: Path, blocks: Optional[int]) -> NetworkParams:
    """Load a checkpoint; a given --blocks must match the stored topology"""
    expected = NetworkConfig(num_blocks=blocks) if blocks is not None else None
    return load_checkpoint(checkpoint, expected=expected)


@click.command("denoise")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--in", "inputs", type=click.Path(exists=True, dir_okay=False, path_type=Path), multiple=True,
              required=True, help="Noisy image (PGM/PNG) or .txt manifest; repeatable")
@click.option("--out", "output", type=click.Path(path_type=Path), required=True,
              help="Output image, or a directory when several inputs are given")
@click.option("--blocks", type=int, help="Expected block count; must match the checkpoint")
@click.option("--triplets", type=click.Path(file_okay=False, path_type=Path),
              help="Also write noisy / denoised / residual images here")
@click.option("--format", "fmt", type=click.Choice(["png", "pgm"]), default="png", show_default=True,
              help="Triplet image format")
@click.pass_context
def denoise_command(ctx: click.Context, checkpoint: Path, inputs: Tuple[Path, ...], output: Path,
                    blocks: Optional[int], triplets: Optional[Path], fmt: str) -> None:
    """Write clean estimates clamp(y - R(y)) for noisy images."""
    params = load_params(Path(checkpoint), blocks)
    sources = expand_inputs(inputs)
    if not sources:
        raise ConfigurationError("no input images")
    output = Path(output)
    to_directory = len(sources) > 1 or output.is_dir()
    if to_directory:
        output.mkdir(parents=True, exist_ok=True)

    written = []
    for source in sources:
        noisy = Tensor.from_array(load_image(source).to_unit())
        estimate = denoise(noisy, params)
        target = output / source.name if to_directory else output
        save_image(GrayImage.from_unit(estimate.image()), target)
        written.append(target)
        if triplets is not None:
            written.extend(write_triplet(noisy, estimate, None, triplets, Path(source).stem, fmt))
        logger.info(f"Denoised {source} -> {target}")

    click.echo(f"denoised {len(sources)} image(s) with {params.config.num_blocks}-block checkpoint {checkpoint}")
    record_run(ctx, output, [checkpoint, *sources], written, checksum=checkpoint_checksum(checkpoint))


@click.command("eval")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Trained checkpoint (required for laplace / gaussian sweeps)")
@click.option("--data", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Manifest of clean evaluation images")
@click.option("--synthetic", type=int, default=0, show_default=True,
              help="Evaluate on this many synthetic scenes instead of --data")
@click.option("--image-size", type=int, default=96, show_default=True, help="Side of synthetic scenes")
@click.option("--sweep", type=click.Choice(SWEEPS), required=True)
@click.option("--scales", help="Comma-separated noise scales (default: the sweep's standard set)")
@click.option("--blocks", type=int, help="Expected block count of --checkpoint")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "output", type=click.Path(dir_okay=False, path_type=Path), required=True,
              help="EvalReport CSV")
@click.option("--triplets", type=click.Path(file_okay=False, path_type=Path),
              help="Write comparison images of the first image at every noise setting")
# block sweep only
@click.option("--block-counts", default=",".join(str(n) for n in DEFAULT_BLOCK_COUNTS), show_default=True)
@click.option("--noise-model", "--model", "noise_model", type=click.Choice(["laplace", "gaussian"]),
              default="laplace", show_default=True, help="Noise for the block sweep")
@click.option("--scale", type=float, help="Noise scale for the block sweep")
@click.option("--train-data", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--train-synthetic", type=int, default=0, show_default=True)
@click.option("--steps", type=int, default=200, show_default=True, help="Training steps per block count")
@click.option("--batch-size", type=int, default=16, show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--patch-size", type=int, default=40, show_default=True)
@click.option("--stride", type=int, default=14, show_default=True)
@click.option("--max-patches", type=int, default=0, show_default=True)
@click.option("--repetitions", type=click.IntRange(min=3), default=3, show_default=True)
@click.pass_context
def eval_command(ctx: click.Context, checkpoint: Optional[Path], data: Optional[Path], synthetic: int,
                 image_size: int, sweep: str, scales: Optional[str], blocks: Optional[int], seed: int,
                 output: Path, triplets: Optional[Path], block_counts: str, noise_model: str,
                 scale: Optional[float], train_data: Optional[Path], train_synthetic: int, steps: int,
                 batch_size: int, lr: float, patch_size: int, stride: int, max_patches: int,
                 repetitions: int) -> None:
    """Reproduce the PSNR tables: noise-scale sweeps or the block-count sweep."""
    output = Path(output)
    threads = worker_threads(ctx)
    # held-out synthetic scenes use a different seed from the training scenes
    images, sources = load_dataset(Path(data) if data else None, synthetic, seed + 1, image_size)

    if sweep == "blocks":
        if scale is None:
            raise ConfigurationError("--sweep blocks needs --scale")
        model = NoiseModel.parse(noise_model, scale)
        train_images, train_sources = load_dataset(Path(train_data) if train_data else None, train_synthetic, seed, image_size)
        pairs = build_training_pairs(train_images, PatchSpec(patch_size, stride), AugmentationSet(), model, seed, max_patches)
        report = run_block_sweep(
            block_counts=parse_list(block_counts, int, "block-counts"),
            pairs=pairs,
            eval_images=images,
            train_config=TrainConfig(batch_size=batch_size, steps=steps, lr=lr, seed=seed, threads=threads),
            noise_model=model,
            seed=seed,
            repetitions=repetitions,
            threads=threads,
        )
        sources = [*sources, *train_sources]
        checksum = None
    else:
        if checkpoint is None:
            raise ConfigurationError(f"--sweep {sweep} needs --checkpoint")
        params = load_params(Path(checkpoint), blocks)
        custom = parse_list(scales, float, "scales")
        if custom:
            settings = [NoiseModel.parse(sweep, s) for s in custom]
        else:
            settings = laplace_sweep() if sweep == "laplace" else gaussian_sweep()
        checksum = checkpoint_checksum(checkpoint)
        report = run_noise_sweep(
            params, images, settings, seed, threads=threads,
            metadata={"checkpoint": str(checkpoint), "crc32": f"{checksum:08x}", "dataset": str(data or f"synthetic:{synthetic}")},
        )
        if triplets is not None:
            clean = Tensor.from_array(images[0].to_unit())
            for model in settings:
                noisy = add_noise(clean, model, seed)
                write_triplet(noisy, denoise(noisy, params), clean, triplets, f"{model.kind}_{model.scale:g}")
        sources = [checkpoint, *sources]

    output.parent.mkdir(parents=True, exist_ok=True)
    report.to_csv(output)
    click.echo(report.to_text())
    record_run(ctx, output, sources, [output], checksum=checksum, extras=report.metadata)
