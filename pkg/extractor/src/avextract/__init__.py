"""Segment-embedding extractor for the audio-visual localization toolkit."""

from .containers import container_bytes, write_container_atomic
from .encoders import DeterministicEncoder, Encoder, EncoderError, ImageBindEncoder
from .extract import ExtractionJob, ExtractionResult, extract
from .media import ArraySource, FfmpegSource, MediaError, VideoSource

__version__ = "0.1.0"

__all__ = [
    "ArraySource",
    "DeterministicEncoder",
    "Encoder",
    "EncoderError",
    "ExtractionJob",
    "ExtractionResult",
    "FfmpegSource",
    "ImageBindEncoder",
    "MediaError",
    "VideoSource",
    "container_bytes",
    "extract",
    "write_container_atomic",
]
