"""Image I/O, patch extraction / augmentation and training-pair synthesis."""

from dnirb.data.image_io import GrayImage, load_image, read_manifest, save_image
from dnirb.data.patches import (
    AugmentationSet,
    PatchSpec,
    augment,
    build_patch_set,
    extract_patches,
    patch_statistics,
    synthetic_thermal_images,
)
from dnirb.data.training_pairs import TrainingPairs, build_training_pairs, make_training_pairs, unit_patches

__all__ = [
    "GrayImage",
    "load_image",
    "save_image",
    "read_manifest",
    "PatchSpec",
    "AugmentationSet",
    "extract_patches",
    "augment",
    "build_patch_set",
    "patch_statistics",
    "synthetic_thermal_images",
    "TrainingPairs",
    "make_training_pairs",
    "build_training_pairs",
    "unit_patches",
]
