"""Writer for the "OVAE" embedding container format.

Independent implementation of the on-disk interface consumed by the
localization toolkit: magic "OVAE", version u32, modality u8 (0 audio,
1 visual, 2 text), T u32, d u32, then T*d float32 little-endian values
in row-major order. Writes are atomic (temp file, then rename).
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"OVAE"
VERSION = 1
MODALITY_CODES = {"audio": 0, "visual": 1, "text": 2}
_HEADER = struct.Struct("<4sIBII")


def container_bytes(modality: str, data: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(data, dtype="<f4")
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"embeddings must be a T x d matrix, got shape {arr.shape}")
    if modality not in MODALITY_CODES:
        raise ValueError(f"unknown modality {modality!r}")
    header = _HEADER.pack(MAGIC, VERSION, MODALITY_CODES[modality], *arr.shape)
    return header + arr.tobytes()


def write_container_atomic(modality: str, data: np.ndarray, path: str | Path) -> None:
    """Write the container through a temp file so readers never see a torn file."""
    target = Path(path)
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_bytes(container_bytes(modality, data))
    os.replace(tmp, target)
