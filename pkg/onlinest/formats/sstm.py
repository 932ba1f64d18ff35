"""SSTM named-tensor weight container.

Protocol (little-endian):
    [4 bytes: b"SSTM"] [u8: version] [u32: num_tensors]
    [for each tensor:
        [u32: name_len] [name_bytes, UTF-8]
        [u32: rank] [rank * u32: dims]
        [prod(dims) * f32: data, row-major]
    ]
"""
from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np

from onlinest.errors import FormatError

logger = logging.getLogger(__name__)

MAGIC = b"SSTM"
VERSION = 1
_U32 = struct.Struct("<I")


def serialize_tensors(tensors: Mapping[str, np.ndarray]) -> bytes:
    """Serialize tensors in mapping order."""
    result = bytearray()
    result.extend(MAGIC)
    result.extend(struct.pack("<B", VERSION))
    result.extend(_U32.pack(len(tensors)))

    total_bytes = 0
    for name, tensor in tensors.items():
        arr = np.ascontiguousarray(tensor, dtype="<f4")
        name_bytes = name.encode("utf-8")
        result.extend(_U32.pack(len(name_bytes)))
        result.extend(name_bytes)
        result.extend(_U32.pack(arr.ndim))
        result.extend(struct.pack(f"<{arr.ndim}I", *arr.shape))
        data = arr.tobytes()
        result.extend(data)
        total_bytes += len(data)

    logger.debug(f"[SSTM] Serialized {len(tensors)} tensors, {total_bytes} data bytes")
    return bytes(result)


def deserialize_tensors(data: bytes) -> Dict[str, np.ndarray]:
    if data[:4] != MAGIC:
        raise FormatError(f"bad SSTM magic {data[:4]!r}")
    if len(data) < 9:
        raise FormatError("SSTM data shorter than its header")
    version = data[4]
    if version != VERSION:
        raise FormatError(f"unsupported SSTM version {version}")
    (count,) = _U32.unpack_from(data, 5)
    offset = 9
    tensors: Dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = _U32.unpack_from(data, offset)
            offset += 4
            name = data[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = _U32.unpack_from(data, offset)
            offset += 4
            if rank > 32:
                raise FormatError(f"tensor {name!r}: invalid rank {rank}")
            shape = struct.unpack_from(f"<{rank}I", data, offset)
            offset += 4 * rank
            n = int(np.prod(shape, dtype=np.int64)) if rank else 1
            if offset + 4 * n > len(data):
                raise FormatError(f"tensor {name!r}: file ended unexpectedly")
            arr = np.frombuffer(data, dtype="<f4", count=n, offset=offset).reshape(shape)
            offset += 4 * n
            if name in tensors:
                raise FormatError(f"duplicate tensor name {name!r}")
            tensors[name] = arr.astype(np.float32)
    except (struct.error, UnicodeDecodeError) as e:
        raise FormatError(f"truncated or corrupt SSTM data: {e}") from e
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after last tensor")
    return tensors


def write_tensors(path: Union[str, Path], tensors: Mapping[str, np.ndarray]) -> None:
    Path(path).write_bytes(serialize_tensors(tensors))


def read_tensors(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read weights file {path}: {e}") from e
    return deserialize_tensors(data)
