"""SSTF feature files.

Layout (little-endian):
    [4 bytes: b"SSTF"]
    [u32: T] [u32: D]
    [T*D f32: frames, row-major]
    [f64: frame_ms]
"""
from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from onlinest.errors import ArgumentError, FormatError
from onlinest.types import AudioFeatures

logger = logging.getLogger(__name__)

MAGIC = b"SSTF"
_HEADER = struct.Struct("<4sII")
_FRAME_MS = struct.Struct("<d")


def encode_features(features: AudioFeatures) -> bytes:
    t, d = features.frames.shape
    body = np.ascontiguousarray(features.frames, dtype="<f4").tobytes()
    return _HEADER.pack(MAGIC, t, d) + body + _FRAME_MS.pack(features.frame_ms)


def decode_features(data: bytes) -> AudioFeatures:
    if len(data) < _HEADER.size:
        raise FormatError("SSTF data shorter than its header")
    magic, t, d = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad SSTF magic {magic!r}")
    n_bytes = t * d * 4
    expected = _HEADER.size + n_bytes + _FRAME_MS.size
    if len(data) != expected:
        raise FormatError(f"SSTF size mismatch: expected {expected} bytes for T={t}, D={d}, got {len(data)}")
    frames = np.frombuffer(data, dtype="<f4", count=t * d, offset=_HEADER.size).reshape(t, d)
    (frame_ms,) = _FRAME_MS.unpack_from(data, _HEADER.size + n_bytes)
    try:
        return AudioFeatures(frames, frame_ms)
    except ArgumentError as e:
        raise FormatError(f"SSTF content invalid: {e}") from e


def write_features(path: Union[str, Path], features: AudioFeatures) -> None:
    Path(path).write_bytes(encode_features(features))


def read_features(path: Union[str, Path]) -> AudioFeatures:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read features file {path}: {e}") from e
    try:
        return decode_features(data)
    except FormatError as e:
        raise FormatError(f"{path}: {e}") from e
