#!/usr/bin/env python3
"""
Residual Learning Trainer
=========================

Minimises the residual loss L = (1/n) * sum_i ||R(y_i) - v_i||^2:
1. residual_loss with its gradient (per-sample or per-pixel normalisation)
2. Mini-batch training with Adam (or SGD), seeded shuffling per epoch
3. Optional validation PSNR, periodic checkpoints and a TrainReport
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from dnirb.checkpoint import save_checkpoint
from dnirb.core import ConvGrads, Tensor
from dnirb.data.training_pairs import TrainingPairs
from dnirb.errors import ConfigurationError, NumericAbortError, ShapeMismatchError
from dnirb.metrics import psnr
from dnirb.network import NetworkParams, denoise, network_backward, network_forward_cached
from dnirb.optimizers import make_optimizer

logger = logging.getLogger(__name__)

LOSS_REDUCTIONS = ("sample", "pixel")


@dataclass
class TrainConfig:
    batch_size: int = 64
    steps: int = 1000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    checkpoint_interval: int = 0
    optimizer: str = "adam"
    loss_reduction: str = "sample"
    log_interval: int = 100
    validation_interval: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.steps < 0:
            raise ConfigurationError(f"steps must be >= 0, got {self.steps}")
        if not self.lr >= 0 or not math.isfinite(self.lr):
            raise ConfigurationError(f"learning rate must be finite and non-negative, got {self.lr}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.loss_reduction not in LOSS_REDUCTIONS:
            raise ConfigurationError(f"loss_reduction must be one of {LOSS_REDUCTIONS}, got {self.loss_reduction!r}")
        if self.threads < 1:
            raise ConfigurationError(f"threads must be >= 1, got {self.threads}")


@dataclass
class TrainReport:
    steps: List[int] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)
    ms_per_step: List[float] = field(default_factory=list)
    val_psnr: Dict[int, float] = field(default_factory=dict)
    cumulative_updates: Dict[str, float] = field(default_factory=dict)
    checkpoints: List[str] = field(default_factory=list)

    @property
    def initial_loss(self) -> float:
        return self.losses[0]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]

    def smoothed_losses(self, window: int = 100) -> List[float]:
        """Means over consecutive non-overlapping windows"""
        values = np.asarray(self.losses)
        return [float(values[i:i + window].mean()) for i in range(0, len(values) - window + 1, window)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "step": self.steps,
            "loss": self.losses,
            "val_psnr": [self.val_psnr.get(step, float("nan")) for step in self.steps],
            "ms_per_step": self.ms_per_step,
        })

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, na_rep="", float_format="%.10g")
        logger.info(f"Wrote training report ({len(self.steps)} steps) to {path}")


def residual_loss(
    pred_noise: Tensor, target_noise: Tensor, reduction: str = "sample", normalizer: Optional[int] = None
) -> Tuple[float, Tensor]:
    """
    Squared residual error and its gradient w.r.t. pred_noise.

    'sample': sum of squared errors divided by the number of samples n.
    'pixel': mean over every element. normalizer overrides n (or the element
    count) when a batch is evaluated in chunks.
    """
    if pred_noise.shape != target_noise.shape:
        raise ShapeMismatchError("residual_loss", target_noise.shape, pred_noise.shape)
    if reduction not in LOSS_REDUCTIONS:
        raise ConfigurationError(f"loss_reduction must be one of {LOSS_REDUCTIONS}, got {reduction!r}")
    diff = pred_noise.data - target_noise.data
    if normalizer is None:
        normalizer = pred_noise.n if reduction == "sample" else diff.size
    loss = float(np.sum(diff * diff)) / normalizer
    return loss, Tensor(2.0 * diff / normalizer)


def loss_and_gradients(
    params: NetworkParams, noisy: Tensor, noise: Tensor, reduction: str = "sample", normalizer: Optional[int] = None
) -> Tuple[float, Dict[str, ConvGrads]]:
    pred, cache = network_forward_cached(noisy, params)
    loss, grad = residual_loss(pred, noise, reduction, normalizer)
    _, grads = network_backward(cache, grad)
    return loss, grads


def _batch_gradients(
    params: NetworkParams, noisy: np.ndarray, noise: np.ndarray, config: TrainConfig, pool: Optional[ThreadPoolExecutor]
) -> Tuple[float, Dict[str, ConvGrads]]:
    n = noisy.shape[0]
    normalizer = n if config.loss_reduction == "sample" else noisy.size
    if pool is None or n < 2:
        return loss_and_gradients(params, Tensor(noisy), Tensor(noise), config.loss_reduction, normalizer)

    chunks = [c for c in np.array_split(np.arange(n), min(config.threads, n)) if c.size]
    results = list(pool.map(
        lambda idx: loss_and_gradients(
            params, Tensor(noisy[idx]), Tensor(noise[idx]), config.loss_reduction, normalizer
        ),
        chunks,
    ))
    # reduce in chunk order so a fixed thread count gives a fixed result
    loss, grads = results[0]
    for chunk_loss, chunk_grads in results[1:]:
        loss += chunk_loss
        grads = {name: grads[name] + chunk_grads[name] for name in grads}
    return loss, grads


def _flat_params(params: NetworkParams) -> Dict[str, np.ndarray]:
    flat = {}
    for name, layer in params.named_layers():
        flat[f"{name}.weights"] = layer.weights
        flat[f"{name}.bias"] = layer.bias
    return flat


def _flat_grads(grads: Dict[str, ConvGrads]) -> Dict[str, np.ndarray]:
    flat = {}
    for name, layer_grads in grads.items():
        flat[f"{name}.weights"] = layer_grads.weights
        flat[f"{name}.bias"] = layer_grads.bias
    return flat


class _BatchSampler:
    """Seeded reshuffle every epoch; batches wrap across epoch boundaries"""

    def __init__(self, count: int, batch_size: int, seed: int):
        self.count = count
        self.batch_size = min(batch_size, count)
        self.rng = np.random.default_rng(seed)
        self.order = self.rng.permutation(count)
        self.cursor = 0
        self.epoch = 0

    def next(self) -> np.ndarray:
        if self.cursor + self.batch_size > self.count:
            leftover = self.order[self.cursor:]
            self.order = self.rng.permutation(self.count)
            self.epoch += 1
            take = self.batch_size - leftover.size
            batch = np.concatenate([leftover, self.order[:take]])
            self.cursor = take
            return batch
        batch = self.order[self.cursor:self.cursor + self.batch_size]
        self.cursor += self.batch_size
        return batch


def validation_psnr(params: NetworkParams, validation: TrainingPairs) -> float:
    """Average PSNR of denoised validation patches against their clean patches"""
    clean = validation.clean()
    scores = [
        psnr(denoise(Tensor(validation.noisy[i:i + 1]), params), clean[i:i + 1])
        for i in range(len(validation))
    ]
    return float(np.mean(scores))


def train(
    params: NetworkParams,
    pairs: TrainingPairs,
    config: TrainConfig,
    validation: Optional[TrainingPairs] = None,
    checkpoint_dir: Optional[Path] = None,
) -> Tuple[NetworkParams, TrainReport]:
    """
    Run config.steps mini-batch updates on a private copy of params.

    Raises NumericAbortError naming the step when the loss stops being finite.
    """
    if len(pairs) == 0:
        raise ConfigurationError("training needs at least one pair")
    params = params.copy()
    flat = _flat_params(params)
    optimizer = make_optimizer(config.optimizer, config.lr, config.beta1, config.beta2, config.epsilon)
    sampler = _BatchSampler(len(pairs), config.batch_size, config.seed)
    report = TrainReport(cumulative_updates={name: 0.0 for name, _ in params.named_layers()})
    pool = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 else None

    logger.info(
        f"Training {params.config.num_blocks}-block network on {len(pairs)} pairs: "
        f"{config.steps} steps, batch {sampler.batch_size}, {config.optimizer} lr={config.lr}"
    )
    try:
        for step in range(1, config.steps + 1):
            started = time.perf_counter()
            indices = sampler.next()
            loss, grads = _batch_gradients(params, pairs.noisy[indices], pairs.noise[indices], config, pool)
            if not math.isfinite(loss):
                logger.error(f"Loss became {loss} at step {step}; aborting")
                raise NumericAbortError(step, loss, report.checkpoints)

            before = {key: value.copy() for key, value in flat.items()}
            optimizer.step(flat, _flat_grads(grads))
            for key, value in flat.items():
                layer = key.rsplit(".", 1)[0]
                report.cumulative_updates[layer] += float(np.abs(value - before[key]).sum())

            report.steps.append(step)
            report.losses.append(loss)
            report.ms_per_step.append((time.perf_counter() - started) * 1000.0)

            if validation is not None and config.validation_interval and step % config.validation_interval == 0:
                report.val_psnr[step] = validation_psnr(params, validation)
            if config.log_interval and (step % config.log_interval == 0 or step == 1):
                val = f", val PSNR {report.val_psnr[step]:.2f} dB" if step in report.val_psnr else ""
                logger.info(f"step {step}/{config.steps}: loss {loss:.6g}{val}")
            if checkpoint_dir is not None and config.checkpoint_interval and step % config.checkpoint_interval == 0:
                path = Path(checkpoint_dir) / f"step_{step:06d}.ckpt"
                save_checkpoint(params, path)
                report.checkpoints.append(str(path))
    finally:
        if pool is not None:
            pool.shutdown()

    if report.losses:
        logger.info(f"Training finished: loss {report.initial_loss:.6g} -> {report.final_loss:.6g}")
    return params, report
