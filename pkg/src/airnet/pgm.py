"""Minimal PGM (P2/P5) reading and writing.

Obstacle rasters arrive as PGM files (0 = free, nonzero = full) and the
stream-function debug dumps go out the same way, so a tiny dependency-free
codec is enough.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np


def read_pgm(path) -> np.ndarray:
    """Read a P2 (ASCII) or P5 (binary) PGM file into a (height, width) uint16 array."""
    data = Path(path).read_bytes()
    if data[:2] not in (b"P2", b"P5"):
        raise ValueError(f"{path}: not a P2/P5 PGM file")
    magic = data[:2]

    # Header: magic, width, height, maxval; '#' comments allowed between tokens.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        m = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\d+)").match(data, pos)
        if m is None:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(int(m.group(1)))
        pos = m.end()
    width, height, maxval = tokens
    if maxval <= 0 or maxval > 65535:
        raise ValueError(f"{path}: bad maxval {maxval}")

    if magic == b"P2":
        values = np.array(data[pos:].split(), dtype=np.uint16)
    else:
        pos += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.uint8
        values = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos).astype(np.uint16)
    if values.size != width * height:
        raise ValueError(f"{path}: expected {width * height} samples, got {values.size}")
    return values.reshape(height, width)


def write_pgm(path, image: np.ndarray, maxval: int = 255, binary: bool = True) -> None:
    """Write a (height, width) integer array as P5 (or P2 if ``binary`` is false)."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("image must be 2-d")
    if img.min() < 0 or img.max() > maxval:
        raise ValueError("image values outside [0, maxval]")
    height, width = img.shape
    header = f"{'P5' if binary else 'P2'}\n{width} {height}\n{maxval}\n"
    path = Path(path)
    if binary:
        dtype = np.uint8 if maxval <= 255 else np.dtype(">u2")
        path.write_bytes(header.encode("ascii") + img.astype(dtype).tobytes())
    else:
        rows = "\n".join(" ".join(str(int(v)) for v in row) for row in img)
        path.write_text(header + rows + "\n")


def encode_pgm(image: np.ndarray, maxval: int = 255) -> bytes:
    """P5 bytes for a (height, width) integer array, without touching disk."""
    img = np.asarray(image)
    height, width = img.shape
    header = f"P5\n{width} {height}\n{maxval}\n"
    dtype = np.uint8 if maxval <= 255 else np.dtype(">u2")
    return header.encode("ascii") + img.astype(dtype).tobytes()
