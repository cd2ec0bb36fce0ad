"""
Shared plumbing for the dnirb subcommands: resolved-parameter capture,
manifest writing and the common noise options.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import click

from dnirb.data.image_io import read_manifest
from dnirb.run_manifest import RunManifest, manifest_path_for

logger = logging.getLogger(__name__)

NOISE_KINDS = ("laplace", "gaussian")


def worker_threads(ctx: click.Context) -> int:
    obj = ctx.find_root().obj or {}
    return int(obj.get("threads", 1))


def resolved_params(ctx: click.Context) -> Dict[str, Any]:
    """Every parameter of the running command after flags, config file and defaults"""
    return dict(ctx.params)


def record_run(
    ctx: click.Context,
    primary_output: Union[str, Path],
    inputs: Sequence[Union[str, Path]],
    outputs: Sequence[Union[str, Path]],
    checksum: Optional[int] = None,
    extras: Optional[Dict[str, Any]] = None,
) -> Path:
    manifest = RunManifest.create(
        subcommand=ctx.info_name,
        config=resolved_params(ctx),
        inputs=list(inputs),
        outputs=list(outputs),
        threads=worker_threads(ctx),
        checksum=checksum,
        extras=extras,
    )
    return manifest.write(manifest_path_for(primary_output))


def noise_options(required: bool = True):
    """--noise-model / --scale pair; no silent default for the scale"""

    def decorate(func):
        func = click.option("--scale", type=float, required=required,
                            help="Laplace b or Gaussian sigma, in 8-bit intensity units")(func)
        func = click.option("--noise-model", "--model", "noise_model", type=click.Choice(NOISE_KINDS, case_sensitive=False),
                            default="laplace", show_default=True, help="Noise distribution")(func)
        return func

    return decorate


def expand_inputs(paths: Sequence[Path]) -> List[Path]:
    """Image files as given; .txt / .lst arguments are read as manifests"""
    expanded: List[Path] = []
    for path in paths:
        if Path(path).suffix.lower() in (".txt", ".lst"):
            expanded.extend(read_manifest(path))
        else:
            expanded.append(Path(path))
    return expanded
