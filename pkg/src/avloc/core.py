"""Vocabulary, label, and embedding types shared by every pipeline stage."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
import numpy as np

from .errors import ScopeError, ShapeError, VocabularyError

SCOPE_FULL = "full"
SCOPE_SEEN_ONLY = "seen_only"
SCOPES = (SCOPE_FULL, SCOPE_SEEN_ONLY)

MODALITIES = ("audio", "visual", "text")

DEFAULT_SPECIAL = "other"
DEFAULT_SEGMENTS = 10
DEFAULT_DIM = 1024


def check_scope(scope: str) -> None:
    if scope not in SCOPES:
        raise ScopeError(f"unknown scope {scope!r}; expected one of {SCOPES}")


@dataclass(frozen=True)
class ClassVocabulary:
    """Ordered seen/unseen class names plus the special background bucket.

    Index order is fixed: [seen..., unseen..., special] for the full
    vocabulary and [seen..., special] for the seen-only view. Keeping the
    special class last makes the seen-only one-hot a plain column
    selection of the full one.
    """

    seen: tuple[str, ...]
    unseen: tuple[str, ...] = ()
    special: str = DEFAULT_SPECIAL

    def __post_init__(self) -> None:
        object.__setattr__(self, "seen", tuple(self.seen))
        object.__setattr__(self, "unseen", tuple(self.unseen))
        if len(self.seen) < 1:
            raise VocabularyError("vocabulary needs at least one seen class")
        combined = self.seen + self.unseen
        if len(set(combined)) != len(combined):
            raise VocabularyError("duplicate class name across seen/unseen lists")
        if self.special in combined:
            raise VocabularyError(
                f"special class {self.special!r} collides with an event class name"
            )

    def classes(self, scope: str = SCOPE_FULL) -> tuple[str, ...]:
        """All class names in index order for the given scope."""
        check_scope(scope)
        if scope == SCOPE_FULL:
            return self.seen + self.unseen + (self.special,)
        return self.seen + (self.special,)

    def size(self, scope: str = SCOPE_FULL) -> int:
        check_scope(scope)
        if scope == SCOPE_FULL:
            return len(self.seen) + len(self.unseen) + 1
        return len(self.seen) + 1

    def special_index(self, scope: str = SCOPE_FULL) -> int:
        return self.size(scope) - 1

    def class_index(self, name: str, scope: str = SCOPE_FULL) -> int:
        """Stable index of ``name`` under the documented ordering."""
        check_scope(scope)
        if name == self.special:
            return self.special_index(scope)
        if name in self.seen:
            return self.seen.index(name)
        if name in self.unseen:
            if scope == SCOPE_SEEN_ONLY:
                raise VocabularyError(
                    f"class {name!r} is unseen and absent from the seen-only scope"
                )
            return len(self.seen) + self.unseen.index(name)
        raise VocabularyError(f"unknown class name {name!r}")

    def class_name(self, index: int, scope: str = SCOPE_FULL) -> str:
        names = self.classes(scope)
        if not 0 <= index < len(names):
            raise VocabularyError(
                f"index {index} out of range for {scope} vocabulary of size {len(names)}"
            )
        return names[index]

    def contains(self, name: str) -> bool:
        return name == self.special or name in self.seen or name in self.unseen

    def is_seen(self, name: str) -> bool:
        return name in self.seen

    def is_unseen(self, name: str) -> bool:
        return name in self.unseen

    def to_dict(self) -> dict:
        return {"seen": list(self.seen), "unseen": list(self.unseen), "special": self.special}

    @classmethod
    def from_dict(cls, payload: dict) -> "ClassVocabulary":
        try:
            return cls(
                seen=tuple(payload["seen"]),
                unseen=tuple(payload.get("unseen", ())),
                special=payload.get("special", DEFAULT_SPECIAL),
            )
        except (KeyError, TypeError) as exc:
            raise VocabularyError(f"malformed vocabulary document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ClassVocabulary":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise VocabularyError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(payload)


@dataclass(frozen=True)
class LabelSequence:
    """Ground truth for one video: a dominant event class plus binary flags.

    ``segment_flags[t] == 1`` means segment ``t`` carries the audio-visual
    event; 0 means background. A video whose flags are all zero keeps its
    event class (it scopes the video as seen or unseen even when no
    segment shows the event).
    """

    video_id: str
    event_class: str
    segment_flags: tuple[int, ...]

    def __post_init__(self) -> None:
        flags = tuple(int(f) for f in self.segment_flags)
        if any(f not in (0, 1) for f in flags):
            raise VocabularyError(
                f"{self.video_id}: segment flags must be 0/1, got {self.segment_flags}"
            )
        if len(flags) < 1:
            raise VocabularyError(f"{self.video_id}: empty segment flags")
        object.__setattr__(self, "segment_flags", flags)

    @property
    def n_segments(self) -> int:
        return len(self.segment_flags)


@dataclass(frozen=True)
class PredictionSequence:
    """Per-segment full-vocabulary class indices predicted for one video."""

    video_id: str
    classes: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))

    @property
    def n_segments(self) -> int:
        return len(self.classes)

    def validate(self, vocab: ClassVocabulary) -> None:
        size = vocab.size(SCOPE_FULL)
        for c in self.classes:
            if not 0 <= c < size:
                raise VocabularyError(
                    f"{self.video_id}: class index {c} outside vocabulary of size {size}"
                )


@dataclass(frozen=True)
class SegmentEmbeddings:
    """T x d embedding matrix for one modality of one video.

    Text embeddings reuse the same container, with one row per class in
    full-vocabulary order instead of one row per segment.
    """

    modality: str
    data: np.ndarray

    def __post_init__(self) -> None:
        if self.modality not in MODALITIES:
            raise ShapeError(f"unknown modality {self.modality!r}; expected one of {MODALITIES}")
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"embeddings must be a T x d matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ShapeError(f"{self.modality} embeddings contain non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def n_segments(self) -> int:
        return int(self.data.shape[0])

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])


@dataclass(frozen=True)
class VideoSample:
    """Paired audio/visual embeddings (and optional label) for one video."""

    video_id: str
    audio: SegmentEmbeddings
    visual: SegmentEmbeddings
    label: LabelSequence | None = None

    def __post_init__(self) -> None:
        if self.audio.data.shape != self.visual.data.shape:
            raise ShapeError(
                f"{self.video_id}: audio shape {self.audio.data.shape} != "
                f"visual shape {self.visual.data.shape}"
            )
        if self.label is not None and self.label.n_segments != self.audio.n_segments:
            raise ShapeError(
                f"{self.video_id}: label has {self.label.n_segments} flags but "
                f"embeddings have {self.audio.n_segments} segments"
            )

    @property
    def n_segments(self) -> int:
        return self.audio.n_segments


def expand_one_hot(
    label: LabelSequence, vocab: ClassVocabulary, scope: str = SCOPE_FULL
) -> np.ndarray:
    """Expand a label into a one-hot matrix over the scoped vocabulary.

    Flagged segments land in the event class column, unflagged ones in the
    special column, so every row sums to exactly 1. The seen-only scope
    refuses unseen event classes: training targets must stay seen-only.
    """
    check_scope(scope)
    if not vocab.contains(label.event_class):
        raise VocabularyError(f"{label.video_id}: unknown event class {label.event_class!r}")
    if label.event_class == vocab.special and any(label.segment_flags):
        raise VocabularyError(
            f"{label.video_id}: special-class label must have all-zero flags"
        )
    if scope == SCOPE_SEEN_ONLY and vocab.is_unseen(label.event_class):
        raise ScopeError(
            f"{label.video_id}: event class {label.event_class!r} is unseen; "
            "seen-only targets cannot encode it"
        )
    event_col = vocab.class_index(label.event_class, scope)
    special_col = vocab.special_index(scope)
    out = np.zeros((label.n_segments, vocab.size(scope)), dtype=np.float64)
    for t, flag in enumerate(label.segment_flags):
        out[t, event_col if flag else special_col] = 1.0
    return out


def label_indices(
    label: LabelSequence, vocab: ClassVocabulary, scope: str = SCOPE_FULL
) -> np.ndarray:
    """Per-segment class indices implied by a label (argmax of the one-hot)."""
    check_scope(scope)
    if not vocab.contains(label.event_class):
        raise VocabularyError(f"{label.video_id}: unknown event class {label.event_class!r}")
    if scope == SCOPE_SEEN_ONLY and vocab.is_unseen(label.event_class):
        raise ScopeError(
            f"{label.video_id}: event class {label.event_class!r} is unseen; "
            "seen-only indices cannot encode it"
        )
    event_col = vocab.class_index(label.event_class, scope)
    special_col = vocab.special_index(scope)
    return np.array(
        [event_col if flag else special_col for flag in label.segment_flags], dtype=np.int64
    )


def class_index(vocab: ClassVocabulary, name: str, scope: str = SCOPE_FULL) -> int:
    """Functional alias for :meth:`ClassVocabulary.class_index`."""
    return vocab.class_index(name, scope)
