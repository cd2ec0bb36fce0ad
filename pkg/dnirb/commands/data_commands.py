#!/usr/bin/env python3
"""
Data Commands
=============

1. patches - patch arithmetic for a dataset (or bare image sizes) with --stats
2. rerun   - replay a run from its manifest
"""

import logging
import re
from pathlib import Path
from typing import List, Optional, Tuple

import click
import numpy as np

from dnirb import __version__
from dnirb.commands import expand_inputs, record_run
from dnirb.data.image_io import GrayImage, load_image
from dnirb.data.patches import AugmentationSet, PatchSpec, patch_statistics
from dnirb.errors import ConfigurationError
from dnirb.run_manifest import RunManifest

logger = logging.getLogger(__name__)

SIZE_PATTERN = re.compile(r"^\s*(\d+)\s*[xX]\s*(\d+)\s*$")


def _blank_image(size: str) -> Tuple[str, GrayImage]:
    match = SIZE_PATTERN.match(size)
    if not match:
        raise ConfigurationError(f"--size expects WIDTHxHEIGHT, got {size!r}")
    width, height = int(match.group(1)), int(match.group(2))
    if width < 1 or height < 1:
        raise ConfigurationError(f"--size must be positive, got {size!r}")
    return f"{width}x{height}", GrayImage(np.zeros((height, width), dtype=np.uint8))


@click.command("patches")
@click.option("--in", "inputs", type=click.Path(exists=True, dir_okay=False, path_type=Path), multiple=True,
              help="Image (PGM/PNG) or .txt manifest; repeatable")
@click.option("--size", "sizes", multiple=True, help="Bare image size WIDTHxHEIGHT, e.g. 640x480; repeatable")
@click.option("--patch-size", type=int, default=40, show_default=True)
@click.option("--stride", type=int, default=14, show_default=True)
@click.option("--augment/--no-augment", default=False, show_default=True,
              help="Count flip, rotation and scale copies too")
@click.option("--stats", is_flag=True, help="Print the per-image, per-scale table")
@click.option("--out", "output", type=click.Path(dir_okay=False, path_type=Path), help="Write the table as CSV")
@click.pass_context
def patches_command(ctx: click.Context, inputs: Tuple[Path, ...], sizes: Tuple[str, ...], patch_size: int,
                    stride: int, augment: bool, stats: bool, output: Optional[Path]) -> None:
    """Report how many training patches a dataset yields."""
    names: List[str] = []
    images: List[GrayImage] = []
    sources = expand_inputs(inputs or ())
    for source in sources:
        names.append(str(source))
        images.append(load_image(source))
    for size in sizes or ():
        name, image = _blank_image(size)
        names.append(name)
        images.append(image)
    if not images:
        raise ConfigurationError("pass --in images or --size WIDTHxHEIGHT")

    augmentation = AugmentationSet() if augment else AugmentationSet.none()
    report = patch_statistics(images, PatchSpec(patch_size, stride), augmentation, names)
    if stats:
        click.echo(report.to_text())
    else:
        click.echo(f"total patches: {report.total}")

    if output is not None:
        output = Path(output)
        output.parent.mkdir(parents=True, exist_ok=True)
        report.to_frame().to_csv(output, index=False)
        logger.info(f"Wrote patch statistics to {output}")
        record_run(ctx, output, sources, [output], extras={"total_patches": report.total})


@click.command("rerun")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.pass_context
def rerun_command(ctx: click.Context, manifest: Path) -> None:
    """Re-execute the run recorded in MANIFEST with its resolved parameters."""
    recorded = RunManifest.load(manifest)
    root = ctx.find_root()
    command = root.command.get_command(root, recorded.subcommand)
    if command is None or command is ctx.command:
        raise ConfigurationError(f"{manifest}: cannot rerun subcommand {recorded.subcommand!r}")
    if recorded.tool_version != __version__:
        logger.warning(f"Manifest written by dnirb {recorded.tool_version}, running {__version__}")
    root.obj["threads"] = recorded.threads
    logger.info(f"Re-running {recorded.subcommand} from {manifest}")
    ctx.invoke(command, **recorded.config)
