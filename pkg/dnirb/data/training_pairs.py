"""
Training pairs: noisy patch y and its effective noise target y - x.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from dnirb.core import Tensor
from dnirb.data.image_io import GrayImage
from dnirb.data.patches import AugmentationSet, PatchSpec, build_patch_set
from dnirb.errors import ImageRangeError, ImageTooSmallError, ShapeMismatchError
from dnirb.noise_lab import INTENSITY_MAX, NoiseModel, sample_noise

logger = logging.getLogger(__name__)


@dataclass
class TrainingPairs:
    """noisy and noise are (count, 1, p, p) arrays in normalised units"""

    noisy: np.ndarray
    noise: np.ndarray

    def __post_init__(self):
        if self.noisy.shape != self.noise.shape or self.noisy.ndim != 4:
            raise ShapeMismatchError("TrainingPairs", self.noisy.shape, self.noise.shape)

    def __len__(self) -> int:
        return self.noisy.shape[0]

    def __getitem__(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        return self.noisy[index], self.noise[index]

    def __iter__(self) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        for index in range(len(self)):
            yield self[index]

    def clean(self) -> np.ndarray:
        return self.noisy - self.noise

    def batch(self, indices: np.ndarray) -> Tuple[Tensor, Tensor]:
        return Tensor(self.noisy[indices]), Tensor(self.noise[indices])


def stack_patches(clean_patches: Sequence[np.ndarray]) -> np.ndarray:
    """Stack equally sized 2-D patches into (count, 1, p, q) float64"""
    stacked = np.stack([np.asarray(p, dtype=np.float64) for p in clean_patches])
    return stacked[:, np.newaxis]


def unit_patches(patches: Sequence[np.ndarray]) -> List[np.ndarray]:
    """uint8 patches from the patch pipeline, rescaled to [0, 1]"""
    return [np.asarray(p, dtype=np.float64) / INTENSITY_MAX for p in patches]


def make_training_pairs(clean_patches: Sequence[np.ndarray], model: NoiseModel, seed: int) -> TrainingPairs:
    """
    Corrupt each clean patch (values in [0, 1]) with model noise.

    The target is the post-clip noise y - x, so y - target reproduces x.
    """
    if len(clean_patches) == 0:
        raise ShapeMismatchError("make_training_pairs", ("count >= 1",), (0,))
    clean = stack_patches(clean_patches)
    if clean.min() < 0.0 or clean.max() > 1.0:
        raise ImageRangeError("make_training_pairs: patches must be normalised to [0, 1]")
    noise = sample_noise(model, clean.shape, seed).data / INTENSITY_MAX
    noisy = np.clip(clean + noise, 0.0, 1.0)
    target = noisy - clean
    logger.info(f"Made {len(clean)} training pairs with {model.label()} (seed {seed})")
    return TrainingPairs(noisy=noisy, noise=target)


def build_training_pairs(
    images: Sequence[GrayImage],
    spec: PatchSpec,
    augmentation: AugmentationSet,
    model: NoiseModel,
    seed: int,
    max_patches: Optional[int] = None,
) -> TrainingPairs:
    """Patch, augment and corrupt a set of images; optionally keep a seeded subset"""
    patches = build_patch_set(images, spec, augmentation)
    if not patches:
        raise ImageTooSmallError(f"no {spec.patch_size}px patches fit in the {len(images)} given images")
    if max_patches and len(patches) > max_patches:
        keep = np.sort(np.random.default_rng(seed).choice(len(patches), size=max_patches, replace=False))
        patches = [patches[i] for i in keep]
        logger.info(f"Subsampled to {max_patches} patches")
    return make_training_pairs(unit_patches(patches), model, seed)
