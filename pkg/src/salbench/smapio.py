"""Binary cache format for saliency maps.

Layout (all little-endian): magic ``SMAP``, uint32 version (= 1),
uint32 height, uint32 width, then H*W float32 values in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SMAP"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


class MapFormatError(ValueError):
    """Raised when a map file does not follow the SMAP layout."""


def save_map(path: str | Path, smap: np.ndarray) -> None:
    smap = np.asarray(smap, dtype=np.float32)
    if smap.ndim != 2:
        raise MapFormatError(f"map must be 2-D, got shape {smap.shape}")
    h, w = smap.shape
    payload = smap.astype("<f4").tobytes()
    Path(path).write_bytes(_HEADER.pack(MAGIC, VERSION, h, w) + payload)


def load_map(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise MapFormatError(f"truncated header: {len(raw)} bytes at offset 0")
    magic, version, h, w = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MapFormatError(f"bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise MapFormatError(f"unsupported version {version} at offset 4")
    expected = _HEADER.size + 4 * h * w
    if len(raw) != expected:
        raise MapFormatError(
            f"truncated payload: expected {expected} bytes, got {len(raw)} "
            f"(offset {len(raw)})"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return data.reshape(h, w).astype(np.float64)
