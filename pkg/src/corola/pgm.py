"""Binary PGM (P5) reading and writing.

Images are exchanged as float arrays in [0, 1]; files store 8-bit samples
(16-bit files with maxval > 255 are accepted on read).
"""
from __future__ import annotations

import os
import re

import numpy as np

_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*([^\s#]+)")


class PgmError(ValueError):
    pass


def _header(data: bytes):
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise PgmError("truncated PGM header")
        fields.append(m.group(1))
        pos = m.end()
    if fields[0] != b"P5":
        raise PgmError(f"not a binary PGM (magic {fields[0]!r})")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError as exc:
        raise PgmError("malformed PGM header") from exc
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise PgmError("invalid PGM dimensions or maxval")
    # exactly one whitespace byte separates the header from the raster
    return width, height, maxval, pos + 1


def read_pgm_raw(path):
    """``(samples, maxval)`` with samples an integer array of shape (height, width)."""
    with open(path, "rb") as fh:
        data = fh.read()
    width, height, maxval, start = _header(data)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * dtype.itemsize
    raster = data[start:start + need]
    if len(raster) != need:
        raise PgmError(f"{path}: raster has {len(raster)} bytes, expected {need}")
    return np.frombuffer(raster, dtype=dtype).reshape(height, width).astype(np.int64), maxval


def read_pgm(path) -> np.ndarray:
    """Image scaled to [0, 1], shape (height, width)."""
    samples, maxval = read_pgm_raw(path)
    return samples / float(maxval)


def quantize(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if not np.all(np.isfinite(img)):
        raise ValueError("image has non-finite values")
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_pgm(path, img) -> None:
    """Write a 2-D float image in [0, 1] as an 8-bit P5 file."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    q = img if img.dtype == np.uint8 else quantize(img)
    h, w = q.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(q).tobytes())


def write_mask(path, mask, height: int, width: int) -> None:
    """Binary mask as a 0/255 PGM."""
    m = (np.asarray(mask).reshape(height, width) != 0).astype(np.uint8) * 255
    write_pgm(path, m)


def read_mask(path) -> np.ndarray:
    samples, _ = read_pgm_raw(path)
    return (samples > 0).astype(np.uint8)


def list_pgms(directory):
    """PGM files of a directory in lexicographic filename order."""
    names = sorted(n for n in os.listdir(directory) if n.lower().endswith((".pgm", ".pnm")))
    return [os.path.join(directory, n) for n in names]
