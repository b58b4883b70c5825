"""Training-free localization: per-modality argmax plus a consistency check.

A segment carries an event only when the audio-text and visual-text
argmax classes coincide on a non-background class; every disagreement,
and agreement on the background class itself, maps to background.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    SCOPE_FULL,
    ClassVocabulary,
    PredictionSequence,
    SegmentEmbeddings,
    VideoSample,
)
from .errors import AvlocError, ShapeError
from .similarity import cosine_similarity_matrix


@dataclass(frozen=True)
class LocalizeFailure:
    video_id: str
    error: str


def similarity_pair(
    audio: SegmentEmbeddings,
    visual: SegmentEmbeddings,
    text_embeddings: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Audio-text and visual-text cosine similarity matrices (T x K each)."""
    return (
        cosine_similarity_matrix(audio.data, text_embeddings),
        cosine_similarity_matrix(visual.data, text_embeddings),
    )


def localize(
    audio: SegmentEmbeddings,
    visual: SegmentEmbeddings,
    text_embeddings: np.ndarray,
    vocab: ClassVocabulary,
    video_id: str = "",
) -> PredictionSequence:
    """Predict a full-vocabulary class index per segment, training-free.

    Ties in either argmax resolve to the lowest class index, so the
    output is deterministic across platforms.
    """
    text = np.asarray(text_embeddings, dtype=np.float64)
    if text.shape[0] != vocab.size(SCOPE_FULL):
        raise ShapeError(
            f"text embeddings have {text.shape[0]} rows but the full vocabulary "
            f"has {vocab.size(SCOPE_FULL)} classes"
        )
    if audio.data.shape != visual.data.shape:
        raise ShapeError(
            f"audio shape {audio.data.shape} != visual shape {visual.data.shape}"
        )
    s_audio, s_visual = similarity_pair(audio, visual, text)
    a_star = np.argmax(s_audio, axis=1)
    v_star = np.argmax(s_visual, axis=1)
    special = vocab.special_index(SCOPE_FULL)
    agree = (a_star == v_star) & (a_star != special)
    classes = np.where(agree, a_star, special)
    return PredictionSequence(video_id=video_id, classes=tuple(int(c) for c in classes))


def batch_localize(
    samples: list[VideoSample],
    text_embeddings: np.ndarray,
    vocab: ClassVocabulary,
    jobs: int = 1,
) -> tuple[list[PredictionSequence], list[LocalizeFailure]]:
    """Order-preserving localize over a batch; failures are collected per video.

    A failing sample does not abort the batch: its video id and error
    message land in the failure list while the rest proceed.
    """

    def run(sample: VideoSample) -> PredictionSequence | LocalizeFailure:
        try:
            return localize(
                sample.audio, sample.visual, text_embeddings, vocab, video_id=sample.video_id
            )
        except AvlocError as exc:
            return LocalizeFailure(video_id=sample.video_id, error=str(exc))

    if jobs > 1 and len(samples) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run, samples))
    else:
        outcomes = [run(s) for s in samples]

    predictions = [o for o in outcomes if isinstance(o, PredictionSequence)]
    failures = [o for o in outcomes if isinstance(o, LocalizeFailure)]
    return predictions, failures
