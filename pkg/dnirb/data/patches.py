#!/usr/bin/env python3
"""
Patch Extraction and Augmentation
=================================

Training patches for the denoiser:
1. Strided top-left anchored patch grid (default 40x40, stride 14)
2. Dihedral augmentation per patch (rotations, optional flip)
3. Scale augmentation per image (bilinear downscale, then re-extract)
4. Patch arithmetic report for --stats
5. Synthetic low-contrast thermal scenes for desk-scale runs
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import ndimage

from dnirb.data.image_io import GrayImage
from dnirb.errors import ConfigurationError, ImageTooSmallError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PatchSpec:
    patch_size: int = 40
    stride: int = 14

    def __post_init__(self):
        if self.patch_size < 1 or not 1 <= self.stride <= self.patch_size:
            raise ConfigurationError(
                f"patch spec needs 1 <= stride <= patch_size, got patch_size={self.patch_size}, stride={self.stride}"
            )


@dataclass(frozen=True)
class AugmentationSet:
    """Which dihedral members and scale factors to enumerate; identity is always kept"""

    flip: bool = True
    rotations: Tuple[int, ...] = (0, 90, 180, 270)
    scales: Tuple[float, ...] = (1.0, 0.9, 0.8, 0.7)

    def __post_init__(self):
        rotations = tuple(int(r) % 360 for r in self.rotations)
        if any(r % 90 for r in rotations):
            raise ConfigurationError(f"rotations must be multiples of 90 degrees, got {self.rotations}")
        if 0 not in rotations:
            rotations = (0,) + rotations
        scales = tuple(float(s) for s in self.scales)
        if any(not 0.0 < s <= 1.0 for s in scales):
            raise ConfigurationError(f"scale factors must lie in (0, 1], got {self.scales}")
        if 1.0 not in scales:
            scales = (1.0,) + scales
        object.__setattr__(self, "rotations", rotations)
        object.__setattr__(self, "scales", scales)

    @classmethod
    def none(cls) -> "AugmentationSet":
        return cls(flip=False, rotations=(0,), scales=(1.0,))

    @property
    def dihedral_count(self) -> int:
        return len(self.rotations) * (2 if self.flip else 1)


def patch_grid_count(dim: int, patch_size: int, stride: int) -> int:
    """Anchors 0, s, 2s, ... with anchor + patch <= dim"""
    if dim < patch_size:
        return 0
    return (dim - patch_size) // stride + 1


def patch_anchors(dim: int, patch_size: int, stride: int) -> List[int]:
    return [i * stride for i in range(patch_grid_count(dim, patch_size, stride))]


def extract_patches(img: GrayImage, spec: PatchSpec) -> List[np.ndarray]:
    """Copies of every grid patch in row-major anchor order; margins are dropped"""
    if img.height < spec.patch_size or img.width < spec.patch_size:
        raise ImageTooSmallError(
            f"image {img.width}x{img.height} is smaller than the {spec.patch_size}px patch"
        )
    p = spec.patch_size
    return [
        img.pixels[top:top + p, left:left + p].copy()
        for top in patch_anchors(img.height, p, spec.stride)
        for left in patch_anchors(img.width, p, spec.stride)
    ]


def augment(patch: np.ndarray, augmentation: AugmentationSet) -> List[np.ndarray]:
    """
    Dihedral copies of a square patch: each rotation, then its mirror when
    flip is on. Symmetric duplicates are kept.
    """
    if patch.ndim != 2 or patch.shape[0] != patch.shape[1]:
        raise ConfigurationError(f"augment expects a square patch, got shape {patch.shape}")
    out = []
    for degrees in augmentation.rotations:
        rotated = np.rot90(patch, k=degrees // 90)
        out.append(np.ascontiguousarray(rotated))
        if augmentation.flip:
            out.append(np.ascontiguousarray(np.fliplr(rotated)))
    return out


def rescale_image(img: GrayImage, factor: float) -> GrayImage:
    """Bilinear resize by factor (output size rounds to nearest pixel)"""
    if factor == 1.0:
        return img
    height = max(1, int(round(img.height * factor)))
    width = max(1, int(round(img.width * factor)))
    zoomed = ndimage.zoom(
        img.pixels.astype(np.float64),
        (height / img.height, width / img.width),
        order=1,
        mode="nearest",
        grid_mode=True,
    )
    return GrayImage(np.clip(np.rint(zoomed), 0, 255).astype(np.uint8))


def build_patch_set(
    images: Sequence[GrayImage], spec: PatchSpec, augmentation: AugmentationSet = AugmentationSet()
) -> List[np.ndarray]:
    """Image order, then scale, then row-major anchor, then dihedral order"""
    patches: List[np.ndarray] = []
    for index, image in enumerate(images):
        for factor in augmentation.scales:
            scaled = rescale_image(image, factor)
            if min(scaled.height, scaled.width) < spec.patch_size:
                logger.info(f"Skipping scale {factor:g} for image {index}: {scaled.width}x{scaled.height} below patch size")
                continue
            for patch in extract_patches(scaled, spec):
                patches.extend(augment(patch, augmentation))
    logger.info(f"Built {len(patches)} patches from {len(images)} images")
    return patches


@dataclass
class PatchStatistics:
    rows: List[Dict] = field(default_factory=list)

    @property
    def total(self) -> int:
        return int(sum(row["augmented_patches"] for row in self.rows))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            self.rows,
            columns=["image", "scale", "width", "height", "grid_x", "grid_y", "base_patches", "augmented_patches"],
        )

    def to_text(self) -> str:
        frame = self.to_frame()
        return f"{frame.to_string(index=False)}\ntotal patches: {self.total}"


def patch_statistics(
    images: Sequence[GrayImage],
    spec: PatchSpec,
    augmentation: AugmentationSet = AugmentationSet(),
    names: Sequence[str] = (),
) -> PatchStatistics:
    """Patch arithmetic per image and scale without materialising the patches"""
    stats = PatchStatistics()
    for index, image in enumerate(images):
        name = names[index] if index < len(names) else str(index)
        for factor in augmentation.scales:
            height = image.height if factor == 1.0 else max(1, int(round(image.height * factor)))
            width = image.width if factor == 1.0 else max(1, int(round(image.width * factor)))
            grid_x = patch_grid_count(width, spec.patch_size, spec.stride)
            grid_y = patch_grid_count(height, spec.patch_size, spec.stride)
            stats.rows.append({
                "image": name,
                "scale": factor,
                "width": width,
                "height": height,
                "grid_x": grid_x,
                "grid_y": grid_y,
                "base_patches": grid_x * grid_y,
                "augmented_patches": grid_x * grid_y * augmentation.dihedral_count,
            })
    return stats


def synthetic_thermal_images(count: int, height: int = 96, width: int = 96, seed: int = 0) -> List[GrayImage]:
    """
    Smooth low-contrast scenes: a gentle background gradient plus a few warm
    blurred blobs, roughly what a thermal camera sees with a small
    temperature spread.
    """
    rng = np.random.default_rng(seed)
    rows, cols = np.mgrid[0:height, 0:width]
    images = []
    for _ in range(count):
        angle = rng.uniform(0.0, 2.0 * np.pi)
        base = rng.uniform(70.0, 150.0)
        gradient = rng.uniform(10.0, 40.0) * (
            np.cos(angle) * rows / height + np.sin(angle) * cols / width
        )
        scene = base + gradient
        for _ in range(int(rng.integers(2, 6))):
            cy, cx = rng.uniform(0, height), rng.uniform(0, width)
            radius = rng.uniform(0.08, 0.25) * min(height, width)
            amplitude = rng.uniform(-35.0, 45.0)
            scene += amplitude * np.exp(-((rows - cy) ** 2 + (cols - cx) ** 2) / (2.0 * radius ** 2))
        scene = ndimage.gaussian_filter(scene, sigma=1.0)
        images.append(GrayImage(np.clip(np.rint(scene), 0, 255).astype(np.uint8)))
    return images
