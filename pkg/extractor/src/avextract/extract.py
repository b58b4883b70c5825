"""Extraction jobs: frozen encoder over segmented videos, containers out.

Per video: split into fixed-length segments (1 second by default), embed
the middle frame of each segment and the segment's waveform, and write
one audio and one visual container. Class names (plus the special
background text) embed once into a shared text container. A manifest
skeleton ties the files together; labels and splits stay placeholders
for the annotation workflow downstream.

Undecodable videos are skipped and logged by id; a missing or broken
encoder is fatal.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .containers import write_container_atomic
from .encoders import Encoder
from .media import MediaError, VideoSource

log = logging.getLogger("avextract")

SPECIAL_CLASS = "other"
PLACEHOLDER_SPLIT = "test"


@dataclass(frozen=True)
class ExtractionJob:
    videos: Sequence[VideoSource]
    class_names: Sequence[str]
    output_dir: Path
    segment_length: float = 1.0
    special_class: str = SPECIAL_CLASS
    text_template: str | None = None  # e.g. "a video of {}"; default: bare name

    def __post_init__(self) -> None:
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        if self.segment_length <= 0:
            raise ValueError("segment_length must be positive")
        if not self.class_names:
            raise ValueError("need at least one class name")
        if self.special_class in self.class_names:
            raise ValueError(f"special class {self.special_class!r} collides with a class name")


@dataclass
class ExtractionResult:
    written: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    manifest_path: Path | None = None
    text_path: Path | None = None


def _segment_rows(source: VideoSource, job: ExtractionJob, encoder: Encoder):
    length = source.duration()
    segments = int(round(length / job.segment_length))
    if segments < 1:
        raise MediaError(f"{source.video_id}: too short for one segment ({length:.2f}s)")
    audio_rows = np.empty((segments, encoder.dim), dtype=np.float64)
    visual_rows = np.empty((segments, encoder.dim), dtype=np.float64)
    for t in range(segments):
        start = t * job.segment_length
        middle = start + 0.5 * job.segment_length
        frame = source.frame_at(middle)
        waveform, rate = source.audio_clip(start, start + job.segment_length)
        visual_rows[t] = encoder.embed_frame(frame)
        audio_rows[t] = encoder.embed_audio(waveform, rate)
    return audio_rows, visual_rows


def _text_rows(job: ExtractionJob, encoder: Encoder) -> np.ndarray:
    names = list(job.class_names) + [job.special_class]
    prompts = [
        job.text_template.format(name) if job.text_template else name for name in names
    ]
    return np.stack([encoder.embed_text(p) for p in prompts])


def extract(job: ExtractionJob, encoder: Encoder, jobs: int = 1) -> ExtractionResult:
    """Run the job; returns written/skipped video ids and output paths."""
    out = job.output_dir
    (out / "emb").mkdir(parents=True, exist_ok=True)
    result = ExtractionResult()

    write_container_atomic("text", _text_rows(job, encoder), out / "text_embeddings.ovae")
    result.text_path = out / "text_embeddings.ovae"

    def run(source: VideoSource):
        try:
            audio_rows, visual_rows = _segment_rows(source, job, encoder)
        except MediaError as exc:
            log.warning("skipping %s: %s", source.video_id, exc)
            return source.video_id, None
        audio_path = f"emb/{source.video_id}.audio.ovae"
        visual_path = f"emb/{source.video_id}.visual.ovae"
        write_container_atomic("audio", audio_rows, out / audio_path)
        write_container_atomic("visual", visual_rows, out / visual_path)
        return source.video_id, (audio_path, visual_path, audio_rows.shape[0])

    if jobs > 1 and len(job.videos) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run, job.videos))
    else:
        outcomes = [run(source) for source in job.videos]

    entries = []
    for video_id, payload in outcomes:
        if payload is None:
            result.skipped.append(video_id)
            continue
        audio_path, visual_path, segments = payload
        result.written.append(video_id)
        entries.append(
            {
                "video_id": video_id,
                "event_class": job.special_class,  # placeholder until annotated
                "segment_flags": [0] * segments,
                "split": PLACEHOLDER_SPLIT,
                "audio_path": audio_path,
                "visual_path": visual_path,
            }
        )

    manifest_path = out / "manifest.jsonl"
    tmp = manifest_path.with_name(manifest_path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    os.replace(tmp, manifest_path)
    result.manifest_path = manifest_path
    return result
