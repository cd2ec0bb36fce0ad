"""
Grayscale Image I/O
===================

8-bit single-channel images:
1. Binary PGM (P5, maxval 255), parsed and written directly
2. 8-bit grayscale PNG through pypng
3. Dataset manifests: newline-delimited image paths
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import png

from dnirb.errors import (
    ImageFormatError,
    MalformedHeaderError,
    TruncatedImageError,
    UnsupportedDepthError,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
PGM_MAGIC = b"P5"
PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


@dataclass
class GrayImage:
    """Row-major 8-bit intensities, shape (height, width)"""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2 or min(pixels.shape) < 1:
            raise ImageFormatError(f"gray image must be a non-empty 2-D array, got shape {pixels.shape}")
        if pixels.dtype != np.uint8:
            if pixels.size and (pixels.min() < 0 or pixels.max() > 255):
                raise ImageFormatError("gray image intensities must lie in [0, 255]")
            pixels = pixels.astype(np.uint8)
        self.pixels = pixels

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def to_unit(self) -> np.ndarray:
        """float64 intensities divided by 255"""
        return self.pixels.astype(np.float64) / 255.0

    @classmethod
    def from_unit(cls, values: np.ndarray) -> "GrayImage":
        """Quantise [0, 1] values back to 8 bits (round, clip)"""
        return cls(np.clip(np.rint(np.asarray(values, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8))


def _pgm_header(blob: bytes, path: PathLike) -> Tuple[int, int, int, int]:
    """Return (width, height, maxval, raster offset) of a P5 file"""
    if not blob.startswith(PGM_MAGIC):
        raise MalformedHeaderError(f"{path}: not a binary PGM (P5) file")
    tokens: List[int] = []
    pos = len(PGM_MAGIC)
    while len(tokens) < 3:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(blob) and blob[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise MalformedHeaderError(f"{path}: malformed PGM header near byte {pos}")
        tokens.append(int(blob[start:pos]))
    if pos >= len(blob) or not blob[pos:pos + 1].isspace():
        raise MalformedHeaderError(f"{path}: PGM header must end with a single whitespace byte")
    width, height, maxval = tokens
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"{path}: PGM dimensions must be positive, got {width}x{height}")
    return width, height, maxval, pos + 1


def read_pgm(path: PathLike) -> GrayImage:
    with open(path, "rb") as handle:
        blob = handle.read()
    width, height, maxval, offset = _pgm_header(blob, path)
    if maxval != 255:
        raise UnsupportedDepthError(f"{path}: only 8-bit PGM (maxval 255) is supported, got maxval {maxval}")
    expected = width * height
    raster = blob[offset:offset + expected]
    if len(raster) < expected:
        raise TruncatedImageError(f"{path}: expected {expected} raster bytes, found {len(raster)}")
    return GrayImage(np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy())


def write_pgm(image: GrayImage, path: PathLike) -> None:
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    with open(path, "wb") as handle:
        handle.write(header + np.ascontiguousarray(image.pixels).tobytes())


def read_png(path: PathLike) -> GrayImage:
    try:
        width, height, rows, info = png.Reader(filename=str(path)).asDirect()
        rows = [np.asarray(row) for row in rows]
    except png.ChunkError as e:
        raise TruncatedImageError(f"{path}: {e}")
    except png.FormatError as e:
        raise MalformedHeaderError(f"{path}: {e}")
    if info.get("bitdepth") != 8:
        raise UnsupportedDepthError(f"{path}: only 8-bit PNG is supported, got bit depth {info.get('bitdepth')}")
    if not info.get("greyscale") or info.get("alpha"):
        raise ImageFormatError(f"{path}: only single-channel grayscale PNG is supported")
    if len(rows) != height:
        raise TruncatedImageError(f"{path}: expected {height} rows, decoded {len(rows)}")
    return GrayImage(np.vstack(rows).astype(np.uint8).reshape(height, width))


def write_png(image: GrayImage, path: PathLike) -> None:
    writer = png.Writer(width=image.width, height=image.height, greyscale=True, bitdepth=8)
    with open(path, "wb") as handle:
        writer.write(handle, image.pixels.tolist())


def load_image(path: PathLike) -> GrayImage:
    """Read a P5 PGM or 8-bit grayscale PNG, chosen by file signature"""
    path = Path(path)
    with open(path, "rb") as handle:
        signature = handle.read(len(PNG_SIGNATURE))
    if signature.startswith(PNG_SIGNATURE):
        image = read_png(path)
    elif signature.startswith(PGM_MAGIC):
        image = read_pgm(path)
    else:
        raise MalformedHeaderError(f"{path}: unrecognised image signature {signature[:2]!r}")
    logger.debug(f"Loaded {path} ({image.width}x{image.height})")
    return image


def save_image(image: GrayImage, path: PathLike) -> None:
    """Write PGM or PNG according to the file suffix (.pgm / .png)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    suffix = path.suffix.lower()
    if suffix == ".png":
        write_png(image, path)
    elif suffix in (".pgm", ".pnm"):
        write_pgm(image, path)
    else:
        raise ImageFormatError(f"{path}: unsupported output format {suffix!r}; use .pgm or .png")
    logger.debug(f"Saved {path} ({image.width}x{image.height})")


def read_manifest(path: PathLike) -> List[Path]:
    """Image paths listed one per line; relative paths resolve against the manifest"""
    path = Path(path)
    entries = []
    with open(path, "r", encoding="utf-8") as handle:
        for raw in handle:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            entry = Path(line)
            entries.append(entry if entry.is_absolute() else path.parent / entry)
    logger.info(f"Manifest {path} lists {len(entries)} images")
    return entries


def write_manifest(paths: List[Path], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for entry in paths:
            handle.write(f"{entry}\n")
