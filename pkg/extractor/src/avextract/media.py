"""Media sources: one middle frame and one waveform clip per segment.

A video source only has to answer three questions: how long is the
video, what does the frame at time t look like, and what audio plays
between two timestamps. ``ArraySource`` wraps in-memory arrays (tests,
dry runs); ``FfmpegSource`` shells out to ffmpeg/ffprobe for real media
when those binaries are present.
"""

from __future__ import annotations

import json
import shutil
import subprocess
from pathlib import Path
from typing import Protocol

import numpy as np


class MediaError(RuntimeError):
    """Undecodable or inconsistent media; the offending video is skipped."""


class VideoSource(Protocol):
    video_id: str

    def duration(self) -> float: ...

    def frame_at(self, timestamp: float) -> np.ndarray: ...

    def audio_clip(self, start: float, end: float) -> tuple[np.ndarray, int]: ...


class ArraySource:
    """In-memory video: frames (N, H, W, C) spread evenly over the duration,
    one mono waveform for the full length."""

    def __init__(
        self,
        video_id: str,
        frames: np.ndarray,
        waveform: np.ndarray,
        sample_rate: int = 16000,
        length_seconds: float | None = None,
    ):
        self.video_id = video_id
        self._frames = np.asarray(frames)
        self._waveform = np.asarray(waveform, dtype=np.float32)
        self._rate = int(sample_rate)
        if self._frames.ndim < 3 or len(self._frames) < 1:
            raise MediaError(f"{video_id}: frames must be a non-empty (N, H, W[, C]) array")
        if self._waveform.ndim != 1 or self._waveform.size < 1:
            raise MediaError(f"{video_id}: waveform must be a non-empty 1-D array")
        self._length = (
            float(length_seconds)
            if length_seconds is not None
            else self._waveform.size / self._rate
        )

    def duration(self) -> float:
        return self._length

    def frame_at(self, timestamp: float) -> np.ndarray:
        if not 0 <= timestamp <= self._length:
            raise MediaError(f"{self.video_id}: timestamp {timestamp} outside the video")
        index = min(int(timestamp / self._length * len(self._frames)), len(self._frames) - 1)
        return self._frames[index]

    def audio_clip(self, start: float, end: float) -> tuple[np.ndarray, int]:
        if not 0 <= start < end <= self._length + 1e-9:
            raise MediaError(f"{self.video_id}: bad clip range [{start}, {end})")
        lo = int(start * self._rate)
        hi = min(int(end * self._rate), self._waveform.size)
        return self._waveform[lo:hi], self._rate


class FfmpegSource:
    """Decode frames and audio through ffmpeg/ffprobe subprocesses."""

    def __init__(self, path: str | Path, sample_rate: int = 16000):
        self.path = Path(path)
        self.video_id = self.path.stem
        self._rate = int(sample_rate)
        if shutil.which("ffprobe") is None or shutil.which("ffmpeg") is None:
            raise MediaError("ffmpeg/ffprobe not found on PATH")
        if not self.path.is_file():
            raise MediaError(f"{self.path}: no such file")

    def duration(self) -> float:
        proc = subprocess.run(
            [
                "ffprobe", "-v", "error", "-print_format", "json",
                "-show_format", str(self.path),
            ],
            capture_output=True,
        )
        if proc.returncode != 0:
            raise MediaError(f"{self.video_id}: ffprobe failed: {proc.stderr.decode()[:200]}")
        try:
            return float(json.loads(proc.stdout)["format"]["duration"])
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise MediaError(f"{self.video_id}: no duration in ffprobe output") from exc

    def frame_at(self, timestamp: float) -> np.ndarray:
        proc = subprocess.run(
            [
                "ffmpeg", "-v", "error", "-ss", f"{timestamp:.3f}", "-i", str(self.path),
                "-frames:v", "1", "-f", "rawvideo", "-pix_fmt", "rgb24",
                "-vf", "scale=224:224", "-",
            ],
            capture_output=True,
        )
        if proc.returncode != 0 or len(proc.stdout) != 224 * 224 * 3:
            raise MediaError(f"{self.video_id}: frame decode failed at {timestamp:.3f}s")
        return np.frombuffer(proc.stdout, dtype=np.uint8).reshape(224, 224, 3)

    def audio_clip(self, start: float, end: float) -> tuple[np.ndarray, int]:
        proc = subprocess.run(
            [
                "ffmpeg", "-v", "error", "-ss", f"{start:.3f}", "-t", f"{end - start:.3f}",
                "-i", str(self.path), "-ac", "1", "-ar", str(self._rate),
                "-f", "f32le", "-",
            ],
            capture_output=True,
        )
        if proc.returncode != 0 or not proc.stdout:
            raise MediaError(f"{self.video_id}: audio decode failed at {start:.3f}s")
        return np.frombuffer(proc.stdout, dtype=np.float32), self._rate
