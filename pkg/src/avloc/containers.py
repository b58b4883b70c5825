"""Binary embedding container: "OVAE" magic, fixed header, f32 payload.

Layout (little-endian, no padding):
    magic     4 bytes  b"OVAE"
    version   u32      currently 1
    modality  u8       0 = audio, 1 = visual, 2 = text
    T         u32      row count (segments, or classes for text)
    d         u32      embedding dimension
    payload   T*d f32  row-major

The payload is float32 on disk; readers upcast to float64. Writing a
container read back from disk reproduces the original bytes exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import SegmentEmbeddings
from .errors import ContainerError

MAGIC = b"OVAE"
VERSION = 1
_HEADER = struct.Struct("<4sIBII")

MODALITY_CODES = {"audio": 0, "visual": 1, "text": 2}
CODE_MODALITIES = {code: name for name, code in MODALITY_CODES.items()}


def container_bytes(embeddings: SegmentEmbeddings) -> bytes:
    t, d = embeddings.data.shape
    header = _HEADER.pack(MAGIC, VERSION, MODALITY_CODES[embeddings.modality], t, d)
    payload = np.ascontiguousarray(embeddings.data, dtype="<f4").tobytes()
    return header + payload


def write_container(embeddings: SegmentEmbeddings, path: str | Path) -> None:
    Path(path).write_bytes(container_bytes(embeddings))


def parse_container(blob: bytes, source: str = "<bytes>") -> SegmentEmbeddings:
    if len(blob) < _HEADER.size:
        raise ContainerError(
            f"{source}: header needs {_HEADER.size} bytes, file has {len(blob)}"
        )
    magic, version, modality_code, t, d = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ContainerError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ContainerError(f"{source}: unsupported version {version}, expected {VERSION}")
    if modality_code not in CODE_MODALITIES:
        raise ContainerError(f"{source}: unknown modality code {modality_code}")
    if t < 1 or d < 1:
        raise ContainerError(f"{source}: non-positive header dimensions T={t}, d={d}")
    expected = _HEADER.size + 4 * t * d
    if len(blob) != expected:
        raise ContainerError(
            f"{source}: truncated or oversized payload, expected {expected} bytes, "
            f"got {len(blob)}"
        )
    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(t, d)
    return SegmentEmbeddings(modality=CODE_MODALITIES[modality_code], data=data.astype(np.float64))


def read_container(path: str | Path) -> SegmentEmbeddings:
    return parse_container(Path(path).read_bytes(), source=str(path))
