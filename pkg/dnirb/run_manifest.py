"""
Run manifests
=============

Every CLI run writes a JSON manifest next to its primary output, holding the
subcommand, the fully resolved parameters, seed, inputs, outputs, tool
version and a UTC timestamp. `dnirb rerun` replays a run from its manifest.
"""

import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pytz

from dnirb import __version__
from dnirb.errors import ConfigurationError

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"
DIRECTORY_MANIFEST = "run" + MANIFEST_SUFFIX


def _jsonable(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


@dataclass
class RunManifest:
    subcommand: str
    config: Dict[str, Any]
    seed: Optional[int] = None
    threads: int = 1
    inputs: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    argv: List[str] = field(default_factory=list)
    tool_version: str = __version__
    created_at: str = ""
    checksum: Optional[str] = None
    extras: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def create(
        cls,
        subcommand: str,
        config: Dict[str, Any],
        inputs: List[Union[str, Path]],
        outputs: List[Union[str, Path]],
        threads: int = 1,
        checksum: Optional[int] = None,
        extras: Optional[Dict[str, Any]] = None,
    ) -> "RunManifest":
        return cls(
            subcommand=subcommand,
            config=_jsonable(dict(config)),
            seed=_jsonable(config.get("seed")),
            threads=threads,
            inputs=[str(p) for p in inputs],
            outputs=[str(p) for p in outputs],
            argv=list(sys.argv[1:]),
            created_at=datetime.now(pytz.UTC).isoformat(),
            checksum=f"{checksum:08x}" if checksum is not None else None,
            extras=_jsonable(extras or {}),
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")
        logger.info(f"Wrote run manifest {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        try:
            with open(path, "r", encoding="utf-8") as handle:
                payload = json.load(handle)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{path}: not a run manifest ({e})") from e
        if not isinstance(payload, dict) or "subcommand" not in payload or "config" not in payload:
            raise ConfigurationError(f"{path}: manifest must hold 'subcommand' and 'config'")
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in payload.items() if k in known})


def manifest_path_for(output: Union[str, Path]) -> Path:
    """<output>.manifest.json for files, <dir>/run.manifest.json for directories"""
    output = Path(output)
    if output.is_dir():
        return output / DIRECTORY_MANIFEST
    return output.with_name(output.name + MANIFEST_SUFFIX)
