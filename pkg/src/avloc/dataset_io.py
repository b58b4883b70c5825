"""On-disk dataset layout: vocab JSON, manifest JSONL, OVAE containers.

A dataset directory holds:
    vocab.json              class vocabulary
    manifest.jsonl          one entry per video
    text_embeddings.ovae    one row per class, full-vocabulary order
    emb/<video>.audio.ovae  per-video containers (paths come from the
    emb/<video>.visual.ovae manifest and are relative to the directory)
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .containers import read_container, write_container
from .core import ClassVocabulary, VideoSample
from .errors import ContainerError, ManifestError
from .manifest import ManifestEntry, load_manifest, save_manifest, split_entries
from .synth import SyntheticDataset

VOCAB_FILE = "vocab.json"
MANIFEST_FILE = "manifest.jsonl"
TEXT_FILE = "text_embeddings.ovae"


def write_dataset(dataset: SyntheticDataset, out_dir: str | Path, force: bool = False) -> Path:
    """Materialize an in-memory dataset; refuses non-empty targets sans force."""
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not force:
        raise ManifestError(
            f"output directory {out} is not empty; pass force=True (or --force) to overwrite"
        )
    (out / "emb").mkdir(parents=True, exist_ok=True)
    dataset.vocab.save(out / VOCAB_FILE)
    write_container(dataset.text_embeddings, out / TEXT_FILE)
    entry_of = {e.video_id: e for e in dataset.entries}
    for sample in dataset.samples:
        entry = entry_of[sample.video_id]
        write_container(sample.audio, out / entry.audio_path)
        write_container(sample.visual, out / entry.visual_path)
    save_manifest(dataset.entries, out / MANIFEST_FILE)
    return out


def load_vocabulary(data_dir: str | Path) -> ClassVocabulary:
    return ClassVocabulary.load(Path(data_dir) / VOCAB_FILE)


def load_text_embeddings(data_dir: str | Path, vocab: ClassVocabulary) -> np.ndarray:
    text = read_container(Path(data_dir) / TEXT_FILE)
    expected = vocab.size()
    if text.n_segments != expected:
        raise ContainerError(
            f"text container has {text.n_segments} rows, vocabulary needs {expected}"
        )
    return text.data


def load_entries(
    data_dir: str | Path, vocab: ClassVocabulary | None = None
) -> list[ManifestEntry]:
    return load_manifest(Path(data_dir) / MANIFEST_FILE, vocab=vocab)


def load_sample(data_dir: str | Path, entry: ManifestEntry) -> VideoSample:
    base = Path(data_dir)
    try:
        audio = read_container(base / entry.audio_path)
        visual = read_container(base / entry.visual_path)
    except (OSError, ContainerError) as exc:
        raise ContainerError(f"video {entry.video_id}: {exc}") from exc
    for emb, want in ((audio, "audio"), (visual, "visual")):
        if emb.modality != want:
            raise ContainerError(
                f"video {entry.video_id}: expected a {want} container, "
                f"got {emb.modality}"
            )
    if audio.n_segments != len(entry.segment_flags):
        raise ContainerError(
            f"video {entry.video_id}: container has {audio.n_segments} segments, "
            f"manifest lists {len(entry.segment_flags)} flags"
        )
    return VideoSample(
        video_id=entry.video_id, audio=audio, visual=visual, label=entry.label()
    )


def load_samples(
    data_dir: str | Path, entries: Iterable[ManifestEntry], split: str = "all"
) -> list[VideoSample]:
    return [load_sample(data_dir, e) for e in split_entries(list(entries), split)]


def seen_text_embeddings(text_full: np.ndarray, vocab: ClassVocabulary) -> np.ndarray:
    """Drop the unseen rows: [seen..., special] in seen-only order."""
    n_seen = len(vocab.seen)
    return np.vstack([text_full[:n_seen], text_full[-1:]])


def save_predictions(preds: Sequence, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pred in preds:
            fh.write(
                json.dumps({"video_id": pred.video_id, "classes": list(pred.classes)}) + "\n"
            )


def load_predictions(path: str | Path):
    from .core import PredictionSequence

    preds = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
                preds.append(
                    PredictionSequence(
                        video_id=str(payload["video_id"]),
                        classes=tuple(payload["classes"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"{path}:{lineno}: bad prediction record: {exc}") from exc
    return preds
