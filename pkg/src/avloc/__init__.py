"""Audio-visual event localization from precomputed segment embeddings."""

from .containers import read_container, write_container
from .core import (
    SCOPE_FULL,
    SCOPE_SEEN_ONLY,
    ClassVocabulary,
    LabelSequence,
    PredictionSequence,
    SegmentEmbeddings,
    VideoSample,
    class_index,
    expand_one_hot,
    label_indices,
)
from .errors import (
    AvlocError,
    ContainerError,
    DegenerateEmbeddingError,
    EvaluationError,
    ManifestError,
    ScopeError,
    ShapeError,
    SplitError,
    TrainingError,
    VocabularyError,
)
from .manifest import ManifestEntry, load_manifest, save_manifest
from .metrics import (
    EventSpan,
    MetricReport,
    accuracy,
    evaluate,
    event_f1,
    extract_events,
    segment_f1,
)
from .similarity import cosine_similarity_matrix, l2_normalize_rows, softmax_rows
from .splits import SplitPlan, SplitRatios, assign_split_labels, generate_splits
from .synth import SynthSpec, SyntheticDataset, synth_generate
from .temporal import (
    TemporalEncoderConfig,
    TemporalEncoderParams,
    init_params,
    load_checkpoint,
    param_count,
    save_checkpoint,
)
from .training import TrainConfig, cross_entropy, fit, fuse, infer
from .zeroshot import batch_localize, localize

__version__ = "0.1.0"

__all__ = [
    "AvlocError",
    "ClassVocabulary",
    "ContainerError",
    "DegenerateEmbeddingError",
    "EvaluationError",
    "EventSpan",
    "LabelSequence",
    "ManifestEntry",
    "ManifestError",
    "MetricReport",
    "PredictionSequence",
    "SCOPE_FULL",
    "SCOPE_SEEN_ONLY",
    "ScopeError",
    "SegmentEmbeddings",
    "ShapeError",
    "SplitError",
    "SplitPlan",
    "SplitRatios",
    "SynthSpec",
    "SyntheticDataset",
    "TemporalEncoderConfig",
    "TemporalEncoderParams",
    "TrainConfig",
    "TrainingError",
    "VideoSample",
    "VocabularyError",
    "accuracy",
    "assign_split_labels",
    "batch_localize",
    "class_index",
    "cosine_similarity_matrix",
    "cross_entropy",
    "evaluate",
    "event_f1",
    "expand_one_hot",
    "extract_events",
    "fit",
    "fuse",
    "generate_splits",
    "infer",
    "init_params",
    "l2_normalize_rows",
    "label_indices",
    "load_checkpoint",
    "load_manifest",
    "localize",
    "param_count",
    "read_container",
    "save_checkpoint",
    "save_manifest",
    "segment_f1",
    "softmax_rows",
    "synth_generate",
    "write_container",
]
