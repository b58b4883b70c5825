"""Synthetic embedding generator: a desk-scale oracle dataset.

Each class owns one orthonormal prototype vector shared by its text
embedding. Event segments embed as the class prototype plus Gaussian
noise (renormalized) in both modalities; background segments point the
two modalities at two different seen-class prototypes, so the
cross-modal consistency check is exactly the discriminating mechanism.
At zero noise the training-free baseline therefore reproduces the
ground truth.

Background draws come from seen classes only: background means
cross-modal mismatch, and letting it impersonate held-out classes would
teach any learner that unseen categories are background, contradicting
the open-vocabulary premise.

The special-class text row is anchored toward the centroid of the class
prototypes (``special_anchor`` controls the blend with its own dedicated
orthogonal direction). Real text encoders place the background word
inside the same text cone as every class name, with a moderate cosine to
all of them; a fully orthogonal background text would make probability
fusion structurally unable to prefer background on cross-modal
disagreement, which no amount of fine-tuning could repair.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .core import ClassVocabulary, LabelSequence, SegmentEmbeddings, VideoSample
from .errors import SplitError
from .manifest import ManifestEntry
from .splits import SplitPlan, SplitRatios, assign_split_labels, generate_splits


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 12
    n_seen: int = 8
    videos_per_class: int = 20
    segments: int = 10
    dim: int = 64
    noise_sigma: float = 0.0
    background_rate: float = 0.3
    special: str = "other"
    special_anchor: float = 0.8
    seed: int = 0
    ratios: SplitRatios = SplitRatios()

    def __post_init__(self) -> None:
        if self.n_seen < 2:
            raise SplitError("need at least two seen classes (background draws two prototypes)")
        if not 1 <= self.n_seen < self.n_classes:
            raise SplitError(
                f"n_seen must lie in [1, n_classes), got {self.n_seen} of {self.n_classes}"
            )
        if self.n_classes + 1 > self.dim:
            raise SplitError(
                f"cannot build {self.n_classes + 1} orthogonal prototypes "
                f"(classes + special) in dimension {self.dim}"
            )
        if self.videos_per_class < 1 or self.segments < 1:
            raise SplitError("videos_per_class and segments must be positive")
        if not 0 <= self.background_rate <= 1:
            raise SplitError(f"background_rate must lie in [0, 1], got {self.background_rate}")
        if self.noise_sigma < 0:
            raise SplitError(f"noise_sigma must be nonnegative, got {self.noise_sigma}")
        if not 0 <= self.special_anchor <= 1:
            raise SplitError(
                f"special_anchor must lie in [0, 1], got {self.special_anchor}"
            )


@dataclass(frozen=True)
class SyntheticDataset:
    spec: SynthSpec
    vocab: ClassVocabulary
    text_embeddings: SegmentEmbeddings
    samples: tuple[VideoSample, ...]
    entries: tuple[ManifestEntry, ...]
    plan: SplitPlan

    def split_samples(self, split: str) -> list[VideoSample]:
        wanted = {e.video_id for e in self.entries if split in ("all", e.split)}
        return [s for s in self.samples if s.video_id in wanted]


def class_names(spec: SynthSpec) -> list[str]:
    width = max(2, len(str(spec.n_classes - 1)))
    return [f"class{idx:0{width}d}" for idx in range(spec.n_classes)]


def _prototypes(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """(n_classes + 1) unit rows; the last row is the special class.

    Class rows are orthonormal. The special row blends its own dedicated
    orthogonal direction with the class centroid per ``special_anchor``.
    """
    raw = rng.standard_normal((spec.dim, spec.n_classes + 1))
    q, r = np.linalg.qr(raw)
    # Fix signs for a canonical decomposition.
    q = (q * np.sign(np.diag(r))).T
    classes, dedicated = q[:-1], q[-1]
    centroid = classes.mean(axis=0)
    centroid = centroid / np.linalg.norm(centroid)
    special = (1.0 - spec.special_anchor) * dedicated + spec.special_anchor * centroid
    special = special / np.linalg.norm(special)
    return np.vstack([classes, special])


def synth_generate(spec: SynthSpec) -> SyntheticDataset:
    """Build the full in-memory dataset: vocab, splits, embeddings, labels."""
    rng = np.random.default_rng(spec.seed)
    names = class_names(spec)
    vocab = ClassVocabulary(
        seen=tuple(names[: spec.n_seen]),
        unseen=tuple(names[spec.n_seen :]),
        special=spec.special,
    )
    prototypes = _prototypes(spec, rng)

    counts = {name: spec.videos_per_class for name in names}
    plan = generate_splits(counts, vocab.seen, ratios=spec.ratios, seed=spec.seed)
    class_videos = {
        name: [f"{name}_v{k:03d}" for k in range(spec.videos_per_class)] for name in names
    }
    split_of = assign_split_labels(class_videos, plan, seed=spec.seed)

    def noisy(prototype: np.ndarray) -> np.ndarray:
        vec = prototype + spec.noise_sigma * rng.standard_normal(spec.dim)
        return vec / np.linalg.norm(vec)

    samples: list[VideoSample] = []
    entries: list[ManifestEntry] = []
    for class_idx, name in enumerate(names):
        for vid in class_videos[name]:
            flags = (rng.random(spec.segments) >= spec.background_rate).astype(int)
            audio = np.empty((spec.segments, spec.dim))
            visual = np.empty((spec.segments, spec.dim))
            for t in range(spec.segments):
                if flags[t]:
                    audio[t] = noisy(prototypes[class_idx])
                    visual[t] = noisy(prototypes[class_idx])
                else:
                    pick_a, pick_v = rng.choice(spec.n_seen, size=2, replace=False)
                    audio[t] = noisy(prototypes[pick_a])
                    visual[t] = noisy(prototypes[pick_v])
            label = LabelSequence(video_id=vid, event_class=name, segment_flags=tuple(flags))
            samples.append(
                VideoSample(
                    video_id=vid,
                    audio=SegmentEmbeddings("audio", audio),
                    visual=SegmentEmbeddings("visual", visual),
                    label=label,
                )
            )
            entries.append(
                ManifestEntry(
                    video_id=vid,
                    event_class=name,
                    segment_flags=tuple(flags),
                    split=split_of[vid],
                    audio_path=f"emb/{vid}.audio.ovae",
                    visual_path=f"emb/{vid}.visual.ovae",
                )
            )

    text = SegmentEmbeddings("text", prototypes)
    return SyntheticDataset(
        spec=spec,
        vocab=vocab,
        text_embeddings=text,
        samples=tuple(samples),
        entries=tuple(entries),
        plan=plan,
    )
