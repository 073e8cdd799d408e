"""IDX image container parsing and plain-text graymap dumps.

The IDX image format is big-endian: a 4-byte magic 0x00000803, then the
image count and the two spatial dimensions as 4-byte unsigned integers,
then row-major unsigned pixel bytes.  Pixels are scaled by 1/255 into
[0, 1] on load.  Reconstructions are written as ASCII portable graymaps
(P2), which diff cleanly and need no image library.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "BadMagic",
    "TruncatedFile",
    "DimMismatch",
    "ImageSet",
    "IMAGE_MAGIC",
    "load_idx_images",
    "write_idx_images",
    "write_pgm",
]

IMAGE_MAGIC = 0x00000803
IMAGE_SIDE = 28


class BadMagic(ValueError):
    """The file does not start with the IDX image magic."""


class TruncatedFile(ValueError):
    """The file is shorter than its header declares."""


class DimMismatch(ValueError):
    """The images are not 28 x 28."""


@dataclass
class ImageSet:
    images: np.ndarray  # (count, 28, 28) floats in [0, 1]
    count: int
    source: str


def load_idx_images(path) -> ImageSet:
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise TruncatedFile(f"{path}: only {len(data)} bytes, no magic")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != IMAGE_MAGIC:
        raise BadMagic(f"{path}: magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")
    if len(data) < 16:
        raise TruncatedFile(f"{path}: header truncated at {len(data)} bytes")
    count, rows, cols = struct.unpack(">III", data[4:16])
    if (rows, cols) != (IMAGE_SIDE, IMAGE_SIDE):
        raise DimMismatch(f"{path}: images are {rows} x {cols}, expected 28 x 28")
    need = 16 + count * rows * cols
    if len(data) < need:
        raise TruncatedFile(f"{path}: payload needs {need} bytes, file has {len(data)}")
    pixels = np.frombuffer(data[16:need], dtype=np.uint8)
    images = pixels.reshape(count, rows, cols).astype(float) / 255.0
    return ImageSet(images=images, count=count, source=str(path))


def write_idx_images(images, path) -> None:
    """Write (n, 28, 28) images as an IDX file; floats in [0, 1] are
    rescaled to bytes, integer arrays are taken as raw pixel values."""
    images = np.asarray(images)
    if images.ndim != 3 or images.shape[1:] != (IMAGE_SIDE, IMAGE_SIDE):
        raise DimMismatch(f"expected (n, 28, 28) images, got {images.shape}")
    if np.issubdtype(images.dtype, np.floating):
        pixels = np.clip(np.rint(images * 255.0), 0, 255).astype(np.uint8)
    else:
        pixels = np.clip(images, 0, 255).astype(np.uint8)
    header = struct.pack(">IIII", IMAGE_MAGIC, images.shape[0], IMAGE_SIDE, IMAGE_SIDE)
    Path(path).write_bytes(header + pixels.tobytes())


def write_pgm(image, path) -> None:
    """Write one grayscale image in [0, 1] as an ASCII portable graymap."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {image.shape}")
    levels = np.clip(np.rint(image * 255.0), 0, 255).astype(int)
    lines = [f"P2", f"{image.shape[1]} {image.shape[0]}", "255"]
    lines += [" ".join(str(v) for v in row) for row in levels]
    Path(path).write_text("\n".join(lines) + "\n")
