"""Flat binary tensor files used for corpus clips, masks, and sampled videos.

Layout: 4 magic bytes, 1 format-version byte, 1 dtype tag byte, 1 ndim byte,
ndim little-endian uint32 extents, then the raw C-order payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ShapeMismatchError

MAGIC = b"GVT1"

_DTYPE_TAGS = {
    np.dtype("uint8"): 0,
    np.dtype("float32"): 1,
    np.dtype("float64"): 2,
    np.dtype("int32"): 3,
}
_TAG_DTYPES = {tag: dt for dt, tag in _DTYPE_TAGS.items()}


def write_tensor(path: str | Path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array)
    if arr.dtype not in _DTYPE_TAGS:
        raise ShapeMismatchError(f"unsupported dtype for tensor file: {arr.dtype}")
    if arr.ndim > 255:
        raise ShapeMismatchError("tensor rank exceeds format limit")
    header = MAGIC + struct.pack("<BBB", 1, _DTYPE_TAGS[arr.dtype], arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ShapeMismatchError(f"{path}: bad magic {magic!r}")
        version, tag, ndim = struct.unpack("<BBB", fh.read(3))
        if version != 1:
            raise ShapeMismatchError(f"{path}: unsupported tensor format version {version}")
        if tag not in _TAG_DTYPES:
            raise ShapeMismatchError(f"{path}: unknown dtype tag {tag}")
        shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
        dtype = _TAG_DTYPES[tag]
        payload = fh.read()
    expected = int(np.prod(shape)) * dtype.itemsize if ndim else dtype.itemsize
    if len(payload) != expected:
        raise ShapeMismatchError(f"{path}: payload length {len(payload)} != expected {expected}")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def write_frames_u8(path: str | Path, frames: np.ndarray) -> None:
    """Store float frames in [0, 1] as uint8 (the corpus on-disk encoding)."""
    if frames.dtype != np.float32 and frames.dtype != np.float64:
        raise ShapeMismatchError("frames must be float in [0, 1]")
    quantized = np.clip(np.rint(frames * 255.0), 0, 255).astype(np.uint8)
    write_tensor(path, quantized)


def read_frames_f32(path: str | Path) -> np.ndarray:
    arr = read_tensor(path)
    if arr.dtype == np.uint8:
        return arr.astype(np.float32) / 255.0
    return arr.astype(np.float32)
