"""
Checkpoint Serialization for DnIRB
==================================

Bit-exact binary checkpoints (layout in docs/checkpoint_format.md):
1. Fixed header: magic, format version, network hyperparameters
2. Manifest: one (name, shape, byte offset) entry per layer tensor
3. Payload: little-endian float64 values, followed by its CRC-32
"""

import logging
import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from dnirb.core import ConvParams
from dnirb.errors import (
    CheckpointChecksumError,
    CheckpointError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    ConfigurationError,
    HyperparameterMismatchError,
)
from dnirb.network import NetworkConfig, NetworkParams, layer_layout

logger = logging.getLogger(__name__)

MAGIC = b"DNIRBCKP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIIIIIB")
_FLAG_BRANCH_RELU = 0x01
_FLAG_POST_ADD_RELU = 0x02
_FLOAT = np.dtype("<f8")

PathLike = Union[str, Path]


@dataclass
class ManifestEntry:
    name: str
    shape: Tuple[int, ...]
    offset: int

    @property
    def nbytes(self) -> int:
        return int(np.prod(self.shape)) * _FLOAT.itemsize


@dataclass
class CheckpointInfo:
    """Decoded header and manifest, without the parameter values"""

    version: int
    config: NetworkConfig
    manifest: List[ManifestEntry]
    checksum: int

    @property
    def parameter_count(self) -> int:
        return sum(int(np.prod(entry.shape)) for entry in self.manifest)


def _tensor_entries(params: NetworkParams) -> List[Tuple[str, np.ndarray]]:
    entries = []
    for name, layer in params.named_layers():
        entries.append((f"{name}.weights", layer.weights))
        entries.append((f"{name}.bias", layer.bias))
    return entries


def encode_checkpoint(params: NetworkParams) -> bytes:
    config = params.config
    flags = (_FLAG_BRANCH_RELU if config.branch_output_relu else 0) | (
        _FLAG_POST_ADD_RELU if config.post_add_relu else 0
    )
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        config.num_blocks,
        config.features,
        config.bottleneck,
        config.in_channels,
        config.stem_kernel,
        flags,
    )

    entries = _tensor_entries(params)
    manifest = [struct.pack("<I", len(entries))]
    payload_parts = []
    offset = 0
    for name, array in entries:
        encoded_name = name.encode("utf-8")
        manifest.append(struct.pack("<H", len(encoded_name)) + encoded_name)
        manifest.append(struct.pack("<B", array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape))
        manifest.append(struct.pack("<Q", offset))
        raw = np.ascontiguousarray(array, dtype=_FLOAT).tobytes()
        payload_parts.append(raw)
        offset += len(raw)

    payload = b"".join(payload_parts)
    checksum = zlib.crc32(payload) & 0xFFFFFFFF
    return b"".join([header, *manifest, struct.pack("<Q", len(payload)), payload, struct.pack("<I", checksum)])


def save_checkpoint(params: NetworkParams, path: PathLike) -> int:
    """Write params to path atomically; returns the payload checksum"""
    path = Path(path)
    blob = encode_checkpoint(params)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    with open(tmp_path, "wb") as handle:
        handle.write(blob)
    os.replace(tmp_path, path)
    checksum = struct.unpack("<I", blob[-4:])[0]
    logger.info(f"Saved checkpoint {path} ({params.parameter_count} parameters, crc32={checksum:08x})")
    return checksum


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, count: int, what: str) -> bytes:
        if self.pos + count > len(self.blob):
            raise CheckpointTruncatedError(
                f"checkpoint truncated while reading {what}: need {count} bytes at {self.pos}, have {len(self.blob) - self.pos}"
            )
        chunk = self.blob[self.pos:self.pos + count]
        self.pos += count
        return chunk

    def unpack(self, fmt: str, what: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def _decode(blob: bytes) -> Tuple[CheckpointInfo, bytes]:
    reader = _Reader(blob)
    magic, version, num_blocks, features, bottleneck, in_channels, stem_kernel, flags = _HEADER.unpack(
        reader.take(_HEADER.size, "header")
    )
    if magic != MAGIC:
        raise CheckpointError(f"not a DnIRB checkpoint (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})")
    try:
        config = NetworkConfig(
            num_blocks=num_blocks,
            features=features,
            bottleneck=bottleneck,
            in_channels=in_channels,
            stem_kernel=stem_kernel,
            branch_output_relu=bool(flags & _FLAG_BRANCH_RELU),
            post_add_relu=bool(flags & _FLAG_POST_ADD_RELU),
        )
    except ConfigurationError as e:
        raise CheckpointError(f"checkpoint header holds an invalid network: {e}") from e

    (count,) = reader.unpack("<I", "manifest size")
    manifest = []
    for _ in range(count):
        (name_len,) = reader.unpack("<H", "manifest name length")
        try:
            name = reader.take(name_len, "manifest name").decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointError(f"manifest name is not UTF-8: {e}") from e
        (ndim,) = reader.unpack("<B", "manifest rank")
        shape = reader.unpack(f"<{ndim}I", "manifest shape")
        (offset,) = reader.unpack("<Q", "manifest offset")
        manifest.append(ManifestEntry(name, tuple(shape), offset))

    (payload_len,) = reader.unpack("<Q", "payload length")
    payload = reader.take(payload_len, "payload")
    (stored_checksum,) = reader.unpack("<I", "checksum")
    actual_checksum = zlib.crc32(payload) & 0xFFFFFFFF
    if actual_checksum != stored_checksum:
        raise CheckpointChecksumError(
            f"payload checksum {actual_checksum:08x} does not match stored {stored_checksum:08x}"
        )
    return CheckpointInfo(version, config, manifest, stored_checksum), payload


def read_checkpoint_info(path: PathLike) -> CheckpointInfo:
    with open(path, "rb") as handle:
        info, _ = _decode(handle.read())
    return info


def checkpoint_checksum(path: PathLike) -> int:
    return read_checkpoint_info(path).checksum


def _check_request(stored: NetworkConfig, requested: NetworkConfig) -> None:
    for field_name in ("num_blocks", "features", "bottleneck", "in_channels", "stem_kernel"):
        if getattr(stored, field_name) != getattr(requested, field_name):
            raise HyperparameterMismatchError(field_name, getattr(stored, field_name), getattr(requested, field_name))


def load_checkpoint(path: PathLike, expected: Optional[NetworkConfig] = None) -> NetworkParams:
    """
    Load a checkpoint written by save_checkpoint.

    Raises CheckpointVersionError, CheckpointChecksumError or
    CheckpointTruncatedError for damaged files, and HyperparameterMismatchError
    when expected is given and the stored topology differs.
    """
    path = Path(path)
    with open(path, "rb") as handle:
        info, payload = _decode(handle.read())
    if expected is not None:
        _check_request(info.config, expected)

    arrays: Dict[str, np.ndarray] = {}
    for entry in info.manifest:
        if entry.offset + entry.nbytes > len(payload):
            raise CheckpointTruncatedError(f"manifest entry {entry.name} runs past the payload")
        raw = payload[entry.offset:entry.offset + entry.nbytes]
        arrays[entry.name] = np.frombuffer(raw, dtype=_FLOAT).astype(np.float64).reshape(entry.shape)

    try:
        layers = {}
        for name, *_ in layer_layout(info.config):
            layers[name] = ConvParams(arrays[f"{name}.weights"], arrays[f"{name}.bias"])
        params = NetworkParams.from_layers(info.config, layers)
    except KeyError as e:
        raise CheckpointError(f"checkpoint is missing tensor {e.args[0]}") from e
    except ConfigurationError as e:
        raise CheckpointError(f"checkpoint tensors do not match its header: {e}") from e
    logger.info(f"Loaded checkpoint {path} ({info.config.num_blocks} blocks, crc32={info.checksum:08x})")
    return params
