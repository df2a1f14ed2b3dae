"""Minimal KNNF reader/writer.

The engine and the bridge exchange features only through this file
format, so the bridge carries its own small implementation of the wire
contract instead of importing the engine package:

    bytes 0-3   magic "KNNF"
    bytes 4-7   u32 version = 1
    bytes 8-11  u32 T
    bytes 12-15 u32 D
    bytes 16-19 f32 frame rate (Hz)
    bytes 20-   T*D f32 payload, row-major, little-endian
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"KNNF"
VERSION = 1
_HEADER = struct.Struct("<4sIIIf")


def write_knnf(frames: np.ndarray, frame_rate_hz: float, path) -> None:
    frames = np.ascontiguousarray(frames, dtype="<f4")
    if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
        raise ValueError(f"frames must be a non-empty 2-D array, got {frames.shape}")
    if not np.all(np.isfinite(frames)):
        raise ValueError("frames contain non-finite values")
    t, d = frames.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, t, d, float(frame_rate_hz)))
        fh.write(frames.tobytes())


def read_knnf(path):
    """Returns (frames, frame_rate_hz)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, t, d, rate = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 4 * t * d
    if len(data) != expected or t == 0 or d == 0:
        raise ValueError(f"{path}: malformed payload")
    frames = np.frombuffer(data, dtype="<f4", count=t * d, offset=_HEADER.size)
    return frames.reshape(t, d).copy(), float(rate)
