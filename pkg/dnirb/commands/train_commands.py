#!/usr/bin/env python3
"""
Training Commands
=================

1. train     - patch a dataset, synthesise pairs and fit a DnIRB network
2. gradcheck - run the finite-difference gradient suite
"""

import logging
from dataclasses import asdict
from pathlib import Path
from typing import List, Optional, Tuple

import click
import numpy as np
import pandas as pd

from dnirb.checkpoint import save_checkpoint
from dnirb.commands import noise_options, record_run, worker_threads
from dnirb.data.image_io import GrayImage, load_image, read_manifest
from dnirb.data.patches import AugmentationSet, PatchSpec, synthetic_thermal_images
from dnirb.data.training_pairs import TrainingPairs, build_training_pairs
from dnirb.errors import ConfigurationError, NumericAbortError
from dnirb.gradcheck import CHECKS, assert_suite_passes, run_suite
from dnirb.network import NetworkConfig, init_params
from dnirb.noise_lab import NoiseModel
from dnirb.trainer import LOSS_REDUCTIONS, TrainConfig, train

logger = logging.getLogger(__name__)


def load_dataset(data: Optional[Path], synthetic: int, seed: int, size: int = 96) -> Tuple[List[GrayImage], List[Path]]:
    """Images from a manifest, or seeded synthetic scenes when no manifest is given"""
    if data is not None and synthetic:
        raise ConfigurationError("pass either --data or --synthetic, not both")
    if data is not None:
        paths = read_manifest(data)
        if not paths:
            raise ConfigurationError(f"{data}: manifest lists no images")
        return [load_image(p) for p in paths], paths
    if synthetic < 1:
        raise ConfigurationError("no data: pass --data MANIFEST or --synthetic COUNT")
    return synthetic_thermal_images(synthetic, size, size, seed=seed), []


def split_validation(pairs: TrainingPairs, fraction: float, seed: int) -> Tuple[TrainingPairs, Optional[TrainingPairs]]:
    if fraction <= 0.0:
        return pairs, None
    held = max(1, int(round(len(pairs) * fraction)))
    if held >= len(pairs):
        raise ConfigurationError(f"validation fraction {fraction} leaves no training pairs")
    order = np.random.default_rng(seed).permutation(len(pairs))
    train_idx, val_idx = np.sort(order[held:]), np.sort(order[:held])
    return (
        TrainingPairs(pairs.noisy[train_idx], pairs.noise[train_idx]),
        TrainingPairs(pairs.noisy[val_idx], pairs.noise[val_idx]),
    )


def _remove_partial(out: Path, written: List[str], checkpoint_dir: Optional[Path]) -> None:
    """Drop what an aborted run wrote; an existing checkpoint at out is kept"""
    leftovers = [out.with_name(out.name + ".tmp")]
    for name in written:
        path = Path(name)
        leftovers += [path, path.with_name(path.name + ".tmp")]
    for path in leftovers:
        if path.exists():
            path.unlink()
            logger.info(f"Removed partial checkpoint {path}")
    if checkpoint_dir is not None and checkpoint_dir.is_dir() and not any(checkpoint_dir.iterdir()):
        checkpoint_dir.rmdir()


@click.command("train")
@click.option("--data", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Manifest listing one training image per line")
@click.option("--synthetic", type=int, default=0, show_default=True,
              help="Train on this many synthetic thermal scenes instead of --data")
@click.option("--blocks", type=int, required=True, help="Number of repeatable DnIRB blocks N")
@noise_options()
@click.option("--steps", type=int, default=1000, show_default=True)
@click.option("--batch-size", type=int, default=64, show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--optimizer", type=click.Choice(["adam", "sgd"]), default="adam", show_default=True)
@click.option("--loss-reduction", type=click.Choice(LOSS_REDUCTIONS), default="sample", show_default=True)
@click.option("--patch-size", type=int, default=40, show_default=True)
@click.option("--stride", type=int, default=14, show_default=True)
@click.option("--augment/--no-augment", default=True, show_default=True, help="Flip, rotation and scale augmentation")
@click.option("--max-patches", type=int, default=0, show_default=True, help="Keep a seeded subset (0 keeps all)")
@click.option("--val-fraction", type=float, default=0.0, show_default=True)
@click.option("--validation-interval", type=int, default=0, show_default=True)
@click.option("--checkpoint-interval", type=int, default=0, show_default=True)
@click.option("--log-interval", type=int, default=100, show_default=True)
@click.option("--branch-relu/--no-branch-relu", default=False, show_default=True)
@click.option("--post-add-relu/--no-post-add-relu", default=False, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "output", type=click.Path(dir_okay=False, path_type=Path), required=True,
              help="Checkpoint file to write")
@click.option("--report", type=click.Path(dir_okay=False, path_type=Path),
              help="Training report CSV (default: <out stem>_report.csv)")
@click.pass_context
def train_command(ctx: click.Context, data: Optional[Path], synthetic: int, blocks: int, noise_model: str,
                  scale: float, steps: int, batch_size: int, lr: float, optimizer: str, loss_reduction: str,
                  patch_size: int, stride: int, augment: bool, max_patches: int, val_fraction: float,
                  validation_interval: int, checkpoint_interval: int, log_interval: int, branch_relu: bool,
                  post_add_relu: bool, seed: int, output: Path, report: Optional[Path]) -> None:
    """Train a DnIRB network to predict the noise of noisy patches."""
    output = Path(output)
    data = Path(data) if data else None
    network_config = NetworkConfig(num_blocks=blocks, branch_output_relu=branch_relu, post_add_relu=post_add_relu)
    model = NoiseModel.parse(noise_model, scale)
    train_config = TrainConfig(
        batch_size=batch_size,
        steps=steps,
        lr=lr,
        seed=seed,
        checkpoint_interval=checkpoint_interval,
        optimizer=optimizer,
        loss_reduction=loss_reduction,
        log_interval=log_interval,
        validation_interval=validation_interval,
        threads=worker_threads(ctx),
    )
    augmentation = AugmentationSet() if augment else AugmentationSet.none()

    images, sources = load_dataset(data, synthetic, seed)
    pairs = build_training_pairs(images, PatchSpec(patch_size, stride), augmentation, model, seed, max_patches)
    pairs, validation = split_validation(pairs, val_fraction, seed)
    params = init_params(network_config, seed)
    logger.info(f"Network N={blocks}: {params.parameter_count} parameters, {len(pairs)} training pairs")

    checkpoint_dir = output.with_name(output.stem + "_steps") if checkpoint_interval else None
    try:
        params, train_report = train(params, pairs, train_config, validation=validation, checkpoint_dir=checkpoint_dir)
    except NumericAbortError as abort:
        _remove_partial(output, abort.checkpoints, checkpoint_dir)
        raise

    checksum = save_checkpoint(params, output)
    report_path = Path(report) if report else output.with_name(output.stem + "_report.csv")
    train_report.to_csv(report_path)
    if train_report.losses:
        click.echo(f"loss {train_report.initial_loss:.6g} -> {train_report.final_loss:.6g} over {steps} steps")
    click.echo(f"checkpoint {output} (crc32 {checksum:08x}, {params.parameter_count} parameters)")

    record_run(
        ctx,
        output,
        sources or [f"synthetic:{synthetic}"],
        [output, report_path, *train_report.checkpoints],
        checksum=checksum,
        extras={
            "parameters": params.parameter_count,
            "training_pairs": len(pairs),
            "initial_loss": train_report.initial_loss if train_report.losses else None,
            "final_loss": train_report.final_loss if train_report.losses else None,
        },
    )


@click.command("gradcheck")
@click.option("--seeds", type=click.IntRange(min=1), default=20, show_default=True, help="Seeds 0..n-1 per case")
@click.option("--samples", type=click.IntRange(min=1), default=50, show_default=True, help="Sampled entries per seed")
@click.option("--case", "cases", type=click.Choice(sorted(CHECKS)), multiple=True,
              help="Restrict to these cases (default: all)")
@click.option("--out", "output", type=click.Path(dir_okay=False, path_type=Path), help="Optional CSV of every check")
@click.pass_context
def gradcheck_command(ctx: click.Context, seeds: int, samples: int, cases: Tuple[str, ...], output: Optional[Path]) -> None:
    """Finite-difference check of conv, ReLU, block and whole-network gradients."""
    results = run_suite(seeds=range(seeds), samples=samples, cases=cases or tuple(CHECKS))
    for result in results:
        click.echo(result.describe())
    passed = int(sum(r.passed for r in results))
    click.echo(f"{passed}/{len(results)} checks passed")
    if output is not None:
        output = Path(output)
        output.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame([{**asdict(r), "passed": r.passed} for r in results]).to_csv(output, index=False)
        record_run(ctx, output, [], [output], extras={"passed": passed, "checks": len(results)})
    assert_suite_passes(results)
