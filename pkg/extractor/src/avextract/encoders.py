"""Joint-embedding encoder adapters.

The extractor only needs three calls: embed one video frame, embed one
second of audio, embed one class-name string, all into the same
d-dimensional space. ``ImageBindEncoder`` adapts the pretrained
ImageBind huge checkpoint when torch and the imagebind package are
installed; ``DeterministicEncoder`` is a dependency-free stand-in that
hashes content into unit vectors, used by the test suite and for
pipeline dry runs.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Protocol

import numpy as np


class EncoderError(RuntimeError):
    """Encoder backend unavailable or checkpoint missing; always fatal."""


class Encoder(Protocol):
    dim: int

    def embed_frame(self, frame: np.ndarray) -> np.ndarray: ...

    def embed_audio(self, waveform: np.ndarray, sample_rate: int) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


class DeterministicEncoder:
    """Content-hashed unit vectors; same input, same embedding, any machine."""

    def __init__(self, dim: int = 1024):
        self.dim = dim

    def _vector(self, payload: bytes) -> np.ndarray:
        digest = hashlib.sha256(payload).digest()
        seed = int.from_bytes(digest[:8], "little")
        vec = np.random.default_rng(seed).standard_normal(self.dim)
        return vec / np.linalg.norm(vec)

    def embed_frame(self, frame: np.ndarray) -> np.ndarray:
        return self._vector(b"frame" + np.ascontiguousarray(frame).tobytes())

    def embed_audio(self, waveform: np.ndarray, sample_rate: int) -> np.ndarray:
        payload = b"audio" + sample_rate.to_bytes(4, "little")
        return self._vector(payload + np.ascontiguousarray(waveform).tobytes())

    def embed_text(self, text: str) -> np.ndarray:
        return self._vector(b"text" + text.encode("utf-8"))


class ImageBindEncoder:
    """Adapter over the pretrained ImageBind huge checkpoint (d = 1024).

    Instantiating it without torch/imagebind installed, or without the
    checkpoint file on disk, raises ``EncoderError``: a missing model is
    a fatal configuration problem, not something to paper over.
    """

    dim = 1024

    def __init__(self, checkpoint_path: str | Path):
        path = Path(checkpoint_path)
        if not path.is_file():
            raise EncoderError(f"encoder checkpoint not found: {path}")
        try:
            import torch  # noqa: F401
            from imagebind.models import imagebind_model
        except ImportError as exc:
            raise EncoderError(
                "ImageBind backend needs the torch and imagebind packages"
            ) from exc
        self._torch = torch
        self._model = imagebind_model.imagebind_huge(pretrained=False)
        state = torch.load(path, map_location="cpu")
        self._model.load_state_dict(state)
        self._model.eval()

    def embed_frame(self, frame: np.ndarray) -> np.ndarray:
        raise NotImplementedError(
            "wire in imagebind.data frame preprocessing for the target deployment"
        )

    def embed_audio(self, waveform: np.ndarray, sample_rate: int) -> np.ndarray:
        raise NotImplementedError(
            "wire in imagebind.data audio preprocessing for the target deployment"
        )

    def embed_text(self, text: str) -> np.ndarray:
        raise NotImplementedError(
            "wire in imagebind.data text preprocessing for the target deployment"
        )
