#!/usr/bin/env python3
"""
Evaluation Harness
==================

PSNR sweeps and timing for trained DnIRB networks:
1. run_noise_sweep  - noisy vs denoised PSNR per noise setting
2. run_block_sweep  - PSNR and inference time per block count
3. time_inference   - median single-image wall clock
4. write_triplet    - noisy / denoised / residual images for inspection

Reports serialise through pandas; infinite PSNR is written as "inf".
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from threadpoolctl import threadpool_limits

from dnirb.checkpoint import load_checkpoint
from dnirb.core import Tensor
from dnirb.data.image_io import GrayImage, save_image
from dnirb.data.training_pairs import TrainingPairs
from dnirb.errors import ConfigurationError, ShapeMismatchError
from dnirb.metrics import mean_squared_error, psnr
from dnirb.network import NetworkConfig, NetworkParams, denoise, init_params, with_blocks
from dnirb.noise_lab import NoiseModel, add_noise
from dnirb.trainer import TrainConfig, train

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_COUNTS = (2, 4, 8, 16)
MIN_TIMING_REPETITIONS = 3

ImageLike = Union[GrayImage, np.ndarray, Tensor]

__all__ = [
    "psnr",
    "mean_squared_error",
    "NoiseSweepRow",
    "BlockSweepRow",
    "EvalReport",
    "run_noise_sweep",
    "run_block_sweep",
    "time_inference",
    "write_triplet",
]


@dataclass
class NoiseSweepRow:
    noise_model: str
    scale: float
    images: int
    noisy_psnr: float
    denoised_psnr: float

    @property
    def gain(self) -> float:
        return self.denoised_psnr - self.noisy_psnr


@dataclass
class BlockSweepRow:
    num_blocks: int
    parameters: int
    images: int
    noisy_psnr: float
    denoised_psnr: float
    seconds_per_image: float
    final_loss: Optional[float] = None


@dataclass
class EvalReport:
    noise_rows: List[NoiseSweepRow] = field(default_factory=list)
    block_rows: List[BlockSweepRow] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def noise_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.noise_rows])

    def block_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.block_rows])

    def to_frame(self) -> pd.DataFrame:
        frames = []
        if self.noise_rows:
            frames.append(self.noise_frame())
        if self.block_rows:
            frames.append(self.block_frame())
        if not frames:
            return pd.DataFrame()
        return pd.concat(frames, ignore_index=True, sort=False)

    def to_csv(self, path: Union[str, Path]) -> None:
        # pandas writes float infinities as "inf"
        self.to_frame().to_csv(path, index=False, na_rep="", float_format="%.4f")
        logger.info(f"Wrote evaluation report ({len(self.noise_rows) + len(self.block_rows)} rows) to {path}")

    def to_text(self) -> str:
        lines = [f"{key}: {value}" for key, value in self.metadata.items()]
        if self.noise_rows:
            lines += ["", self.noise_frame().to_string(index=False, float_format=lambda v: f"{v:.2f}")]
        if self.block_rows:
            lines += ["", self.block_frame().to_string(index=False, float_format=lambda v: f"{v:.4f}")]
        return "\n".join(lines).strip() + "\n"


def _unit_plane(image: ImageLike) -> np.ndarray:
    if isinstance(image, GrayImage):
        return image.to_unit()
    if isinstance(image, Tensor):
        return image.image()
    plane = np.asarray(image, dtype=np.float64)
    if plane.ndim != 2:
        raise ShapeMismatchError("evaluation", ("h", "w"), plane.shape)
    return plane


def _as_tensor(image: ImageLike) -> Tensor:
    if isinstance(image, Tensor):
        return image
    return Tensor.from_array(_unit_plane(image))


def _noise_seed(seed: int, setting: int, image: int) -> int:
    """Independent, reproducible stream per (sweep seed, noise setting, image)"""
    return int(np.random.SeedSequence([seed, setting, image]).generate_state(1)[0])


def _score_images(
    params: NetworkParams,
    clean: List[Tensor],
    model: NoiseModel,
    seed: int,
    setting: int,
    threads: int,
) -> Tuple[float, float]:
    def score(indexed: Tuple[int, Tensor]) -> Tuple[float, float]:
        index, clean_image = indexed
        noisy = add_noise(clean_image, model, _noise_seed(seed, setting, index))
        return psnr(noisy, clean_image), psnr(denoise(noisy, params), clean_image)

    if threads > 1 and len(clean) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(score, enumerate(clean)))
    else:
        scores = [score(item) for item in enumerate(clean)]
    noisy_scores, denoised_scores = zip(*scores)
    return float(np.mean(noisy_scores)), float(np.mean(denoised_scores))


def run_noise_sweep(
    params: NetworkParams,
    clean_images: Sequence[ImageLike],
    noise_models: Sequence[NoiseModel],
    seed: int,
    threads: int = 1,
    metadata: Optional[Dict[str, Any]] = None,
) -> EvalReport:
    """Corrupt every image at each noise setting, denoise, and average PSNR"""
    if len(clean_images) == 0:
        raise ConfigurationError("noise sweep needs at least one image")
    clean = [_as_tensor(image) for image in clean_images]
    report = EvalReport(metadata={"seed": seed, "images": len(clean), **(metadata or {})})
    for setting, model in enumerate(noise_models):
        noisy_psnr, denoised_psnr = _score_images(params, clean, model, seed, setting, threads)
        row = NoiseSweepRow(model.kind, model.scale, len(clean), noisy_psnr, denoised_psnr)
        logger.info(f"{model.label()}: noisy {noisy_psnr:.2f} dB -> denoised {denoised_psnr:.2f} dB")
        report.noise_rows.append(row)
    return report


def time_inference(params: NetworkParams, image: ImageLike, repetitions: int = MIN_TIMING_REPETITIONS) -> float:
    """
    Median seconds of one denoise pass; the first (warm-up) pass is not counted.

    BLAS is held to one thread while timing so ratios between block counts do
    not depend on the core count.
    """
    if repetitions < MIN_TIMING_REPETITIONS:
        raise ConfigurationError(f"repetitions must be >= {MIN_TIMING_REPETITIONS}, got {repetitions}")
    noisy = _as_tensor(image)
    timings = []
    with threadpool_limits(limits=1, user_api="blas"):
        denoise(noisy, params)
        for _ in range(repetitions):
            started = time.perf_counter()
            denoise(noisy, params)
            timings.append(time.perf_counter() - started)
    median = float(np.median(timings))
    logger.debug(f"Inference on {noisy.h}x{noisy.w} with {params.config.num_blocks} blocks: {median:.4f} s")
    return median


def run_block_sweep(
    block_counts: Sequence[int] = DEFAULT_BLOCK_COUNTS,
    pairs: Optional[TrainingPairs] = None,
    eval_images: Sequence[ImageLike] = (),
    train_config: Optional[TrainConfig] = None,
    noise_model: Optional[NoiseModel] = None,
    seed: int = 0,
    base_config: Optional[NetworkConfig] = None,
    checkpoints: Optional[Dict[int, Union[str, Path]]] = None,
    timing_image: Optional[ImageLike] = None,
    repetitions: int = MIN_TIMING_REPETITIONS,
    threads: int = 1,
) -> EvalReport:
    """
    For each block count, train from a seeded init with the same budget (or
    load the given checkpoint), then record PSNR and single-image time.
    """
    if len(eval_images) == 0:
        raise ConfigurationError("block sweep needs at least one evaluation image")
    if noise_model is None:
        raise ConfigurationError("block sweep needs a noise model")
    checkpoints = checkpoints or {}
    train_config = train_config or TrainConfig()
    base_config = base_config or NetworkConfig(num_blocks=1)
    clean = [_as_tensor(image) for image in eval_images]
    timing_input = _as_tensor(timing_image) if timing_image is not None else clean[0]

    report = EvalReport(metadata={"seed": seed, "images": len(clean), "noise": noise_model.label()})
    for num_blocks in block_counts:
        config = with_blocks(base_config, num_blocks)
        final_loss = None
        if num_blocks in checkpoints:
            params = load_checkpoint(checkpoints[num_blocks], expected=config)
        elif pairs is not None:
            params, train_report = train(init_params(config, seed), pairs, train_config)
            final_loss = train_report.final_loss if train_report.losses else None
        else:
            raise ConfigurationError(f"no training pairs or checkpoint for N={num_blocks}")

        # same noise realisation for every block count
        noisy_psnr, denoised_psnr = _score_images(params, clean, noise_model, seed, 0, threads)
        seconds = time_inference(params, timing_input, repetitions)
        row = BlockSweepRow(num_blocks, params.parameter_count, len(clean), noisy_psnr, denoised_psnr, seconds, final_loss)
        logger.info(f"N={num_blocks}: {denoised_psnr:.2f} dB, {seconds:.4f} s/image")
        report.block_rows.append(row)
    return report


def residual_image(noisy: ImageLike, denoised: ImageLike) -> np.ndarray:
    """Removed noise y - x_hat mapped to 8-bit around mid grey: 128 + 255 * r"""
    removed = _unit_plane(noisy) - _unit_plane(denoised)
    return np.clip(np.rint(128.0 + 255.0 * removed), 0, 255).astype(np.uint8)


def write_triplet(
    noisy: ImageLike,
    denoised: ImageLike,
    clean: Optional[ImageLike],
    out_dir: Union[str, Path],
    stem: str,
    fmt: str = "png",
) -> List[Path]:
    fmt = fmt.lower().lstrip(".")
    if fmt not in ("png", "pgm"):
        raise ConfigurationError(f"triplet format must be png or pgm, got {fmt!r}")
    out_dir = Path(out_dir)
    written = []
    images = [("noisy", GrayImage.from_unit(_unit_plane(noisy))), ("denoised", GrayImage.from_unit(_unit_plane(denoised)))]
    images.append(("residual", GrayImage(residual_image(noisy, denoised))))
    if clean is not None:
        images.append(("clean", GrayImage.from_unit(_unit_plane(clean))))
    for role, image in images:
        path = out_dir / f"{stem}_{role}.{fmt}"
        save_image(image, path)
        written.append(path)
    logger.info(f"Wrote {len(written)} comparison images for {stem} to {out_dir}")
    return written
