"""JSON-lines manifest tying video labels, splits, and container paths."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .core import ClassVocabulary, LabelSequence
from .errors import ManifestError

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    event_class: str
    segment_flags: tuple[int, ...]
    split: str
    audio_path: str
    visual_path: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "segment_flags", tuple(int(f) for f in self.segment_flags))
        if self.split not in SPLITS:
            raise ManifestError(
                f"{self.video_id}: split must be one of {SPLITS}, got {self.split!r}"
            )
        if any(f not in (0, 1) for f in self.segment_flags):
            raise ManifestError(f"{self.video_id}: segment flags must be 0/1")

    def label(self) -> LabelSequence:
        return LabelSequence(
            video_id=self.video_id,
            event_class=self.event_class,
            segment_flags=self.segment_flags,
        )

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "event_class": self.event_class,
            "segment_flags": list(self.segment_flags),
            "split": self.split,
            "audio_path": self.audio_path,
            "visual_path": self.visual_path,
        }


_REQUIRED_KEYS = ("video_id", "event_class", "segment_flags", "split", "audio_path", "visual_path")


def _entry_from_dict(payload: dict, where: str) -> ManifestEntry:
    missing = [k for k in _REQUIRED_KEYS if k not in payload]
    if missing:
        raise ManifestError(f"{where}: missing keys {missing}")
    try:
        return ManifestEntry(
            video_id=str(payload["video_id"]),
            event_class=str(payload["event_class"]),
            segment_flags=tuple(payload["segment_flags"]),
            split=str(payload["split"]),
            audio_path=str(payload["audio_path"]),
            visual_path=str(payload["visual_path"]),
        )
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"{where}: {exc}") from exc


def validate_entries(
    entries: Sequence[ManifestEntry],
    vocab: ClassVocabulary | None = None,
    expected_segments: int | None = None,
) -> None:
    """Cross-entry checks: unique ids, one T everywhere, seen-only training."""
    seen_ids: set[str] = set()
    t = expected_segments
    for i, entry in enumerate(entries):
        where = f"entry {i} ({entry.video_id})"
        if entry.video_id in seen_ids:
            raise ManifestError(f"{where}: duplicate video id")
        seen_ids.add(entry.video_id)
        if t is None:
            t = len(entry.segment_flags)
        elif len(entry.segment_flags) != t:
            raise ManifestError(
                f"{where}: {len(entry.segment_flags)} segment flags, expected {t}"
            )
        if vocab is not None:
            if not vocab.contains(entry.event_class):
                raise ManifestError(f"{where}: unknown class {entry.event_class!r}")
            if entry.split == "train" and vocab.is_unseen(entry.event_class):
                raise ManifestError(
                    f"{where}: unseen class {entry.event_class!r} assigned to the "
                    "train split; training data must be seen-only"
                )


def load_manifest(
    path: str | Path,
    vocab: ClassVocabulary | None = None,
    expected_segments: int | None = None,
) -> list[ManifestEntry]:
    """Parse a JSON-lines manifest; errors carry 1-based line numbers."""
    entries: list[ManifestEntry] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{where}: invalid JSON: {exc}") from exc
            if not isinstance(payload, dict):
                raise ManifestError(f"{where}: expected a JSON object")
            entries.append(_entry_from_dict(payload, where))
    validate_entries(entries, vocab=vocab, expected_segments=expected_segments)
    return entries


def save_manifest(entries: Iterable[ManifestEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")


def split_entries(entries: Iterable[ManifestEntry], split: str) -> list[ManifestEntry]:
    if split not in SPLITS + ("all",):
        raise ManifestError(f"unknown split {split!r}")
    if split == "all":
        return list(entries)
    return [e for e in entries if e.split == split]


def with_paths(entry: ManifestEntry, audio_path: str, visual_path: str) -> ManifestEntry:
    return replace(entry, audio_path=audio_path, visual_path=visual_path)
