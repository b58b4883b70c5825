"""Row normalization, cosine similarity, and temperature softmax."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateEmbeddingError, ShapeError

ZERO_NORM_TOL = 1e-12


def row_norms(matrix: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(matrix, dtype=np.float64), axis=1)


def l2_normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Scale every row to unit Euclidean norm.

    Zero-norm rows are a hard error: they indicate a failed upstream
    extraction, not data worth clamping into range.
    """
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {arr.shape}")
    norms = row_norms(arr)
    bad = np.flatnonzero(norms <= ZERO_NORM_TOL)
    if bad.size:
        raise DegenerateEmbeddingError(
            f"rows {bad.tolist()} have (near-)zero norm and cannot be normalized"
        )
    return arr / norms[:, None]


def cosine_similarity_matrix(features: np.ndarray, references: np.ndarray) -> np.ndarray:
    """Cosine similarities between every feature row and every reference row.

    Returns a T x K matrix with entries in [-1, 1]; both inputs are
    L2-normalized internally.
    """
    f = np.asarray(features, dtype=np.float64)
    r = np.asarray(references, dtype=np.float64)
    if f.ndim != 2 or r.ndim != 2:
        raise ShapeError(f"expected 2-D matrices, got shapes {f.shape} and {r.shape}")
    if f.shape[1] != r.shape[1]:
        raise ShapeError(
            f"embedding dimensions disagree: features d={f.shape[1]}, references d={r.shape[1]}"
        )
    return l2_normalize_rows(f) @ l2_normalize_rows(r).T


def softmax_rows(scores: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Row-wise softmax of ``scores / temperature``.

    Uses max subtraction for numerical stability; each output row sums
    to 1.
    """
    if not temperature > 0:
        raise ShapeError(f"temperature must be positive, got {temperature}")
    arr = np.asarray(scores, dtype=np.float64) / float(temperature)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {arr.shape}")
    shifted = arr - arr.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)
