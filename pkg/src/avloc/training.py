"""Fine-tuning baseline: probability fusion, cross-entropy, Adam, inference.

Training sees only the seen-class text embeddings (plus the special
class); the open-vocabulary text set enters at inference time. Gradients
flow into the temporal-layer parameters (and optionally the softmax
temperature) while the input embeddings stay frozen constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import temporal
from .core import (
    SCOPE_FULL,
    SCOPE_SEEN_ONLY,
    ClassVocabulary,
    PredictionSequence,
    VideoSample,
    expand_one_hot,
)
from .errors import ShapeError, TrainingError
from .similarity import l2_normalize_rows, row_norms, softmax_rows
from .temporal import TemporalEncoderParams

FUSION_SQRT = "sqrt"
FUSION_PROB_AVG = "prob_avg"
FUSION_FEA_AVG = "fea_avg"
FUSION_MODES = (FUSION_SQRT, FUSION_PROB_AVG, FUSION_FEA_AVG)

LOG_CLAMP = 1e-12
MIN_TEMPERATURE = 1e-3


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 5
    learning_rate: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    fusion: str = FUSION_SQRT
    temperature: float = 0.07
    learn_temperature: bool = False
    data_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.epochs < 1:
            raise TrainingError("batch_size and epochs must be >= 1")
        if self.learning_rate < 0:
            raise TrainingError(f"learning rate must be nonnegative, got {self.learning_rate}")
        if not 0 < self.data_ratio <= 1:
            raise TrainingError(f"data_ratio must lie in (0, 1], got {self.data_ratio}")
        if self.fusion not in FUSION_MODES:
            raise TrainingError(f"fusion must be one of {FUSION_MODES}, got {self.fusion!r}")
        if self.temperature <= 0:
            raise TrainingError(f"temperature must be positive, got {self.temperature}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise TrainingError("invalid Adam hyperparameters")


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    val_avg: float | None = None

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "loss": self.loss, "val_avg": self.val_avg}


@dataclass
class FitResult:
    params: TemporalEncoderParams
    trace: list[EpochRecord]
    best_epoch: int | None


def fuse(p_audio: np.ndarray, p_visual: np.ndarray, mode: str) -> np.ndarray:
    """Combine per-modality probability rows into audio-visual event scores.

    sqrt mode takes the element-wise geometric mean and renormalizes each
    row back to a distribution (the geometric mean of two distributions
    is sub-normalized; renormalizing preserves the row argmax). prob_avg
    takes the arithmetic mean. fea_avg fuses features upstream, so here
    it passes the already-fused probabilities through unchanged.
    """
    a = np.asarray(p_audio, dtype=np.float64)
    v = np.asarray(p_visual, dtype=np.float64)
    if a.shape != v.shape:
        raise ShapeError(f"probability shapes disagree: {a.shape} vs {v.shape}")
    if np.any(a < 0) or np.any(v < 0):
        raise TrainingError("probabilities must be nonnegative")
    if mode == FUSION_SQRT:
        u = np.sqrt(a * v)
        return u / u.sum(axis=1, keepdims=True)
    if mode == FUSION_PROB_AVG:
        return 0.5 * (a + v)
    if mode == FUSION_FEA_AVG:
        if not np.array_equal(a, v):
            raise TrainingError(
                "fea_avg fuses features upstream; both arguments must carry the "
                "same already-fused probabilities"
            )
        return a
    raise TrainingError(f"unknown fusion mode {mode!r}")


def cross_entropy(fused: np.ndarray, target_one_hot: np.ndarray) -> float:
    """Mean over segments of -log p(target), with the log clamped at 1e-12."""
    p = np.asarray(fused, dtype=np.float64)
    y = np.asarray(target_one_hot, dtype=np.float64)
    if p.shape != y.shape:
        raise ShapeError(f"prediction shape {p.shape} != target shape {y.shape}")
    row_sums = p.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > 1e-6):
        raise TrainingError("fused rows must sum to 1 within 1e-6")
    picked = (p * y).sum(axis=1)
    return float(-np.log(np.maximum(picked, LOG_CLAMP)).mean())


def _ce_grad(fused: np.ndarray, target_one_hot: np.ndarray) -> tuple[float, np.ndarray]:
    p = np.asarray(fused, dtype=np.float64)
    y = np.asarray(target_one_hot, dtype=np.float64)
    loss = cross_entropy(p, y)
    picked = (p * y).sum(axis=1, keepdims=True)
    t = p.shape[0]
    grad = np.where((y > 0) & (picked > LOG_CLAMP), -1.0 / (t * np.maximum(picked, LOG_CLAMP)), 0.0)
    return loss, grad


def _fuse_grad(
    dfused: np.ndarray, p_audio: np.ndarray, p_visual: np.ndarray, fused: np.ndarray, mode: str
) -> tuple[np.ndarray, np.ndarray]:
    if mode == FUSION_SQRT:
        u = np.sqrt(p_audio * p_visual)
        ssum = u.sum(axis=1, keepdims=True)
        du = (dfused - (dfused * fused).sum(axis=1, keepdims=True)) / ssum
        d_audio = du * u / (2.0 * p_audio)
        d_visual = du * u / (2.0 * p_visual)
        return d_audio, d_visual
    if mode == FUSION_PROB_AVG:
        return 0.5 * dfused, 0.5 * dfused
    raise TrainingError(f"no probability-space gradient for fusion mode {mode!r}")


def _stream_forward(features: np.ndarray, text_normed: np.ndarray, tau: float):
    norms = row_norms(features)
    if np.any(norms <= 1e-12):
        raise TrainingError("temporal encoder produced a zero-norm feature row")
    normed = features / norms[:, None]
    sims = normed @ text_normed.T
    probs = softmax_rows(sims, temperature=tau)
    return {"norms": norms, "normed": normed, "sims": sims, "probs": probs}


def _stream_backward(dprobs: np.ndarray, cache: dict, text_normed: np.ndarray, tau: float):
    probs, sims = cache["probs"], cache["sims"]
    dz = probs * (dprobs - (dprobs * probs).sum(axis=1, keepdims=True))
    dsims = dz / tau
    dtau = float(-(dz * sims).sum() / (tau * tau))
    dfeat = (
        dsims @ text_normed
        - (dsims * sims).sum(axis=1, keepdims=True) * cache["normed"]
    ) / cache["norms"][:, None]
    return dfeat, dtau


def fused_probabilities(
    params: TemporalEncoderParams,
    audio: np.ndarray,
    visual: np.ndarray,
    text_embeddings: np.ndarray,
    fusion: str,
    tau: float,
) -> np.ndarray:
    """Forward-only pipeline: temporal encoder, cosine, softmax, fusion."""
    out_a, out_v = temporal.forward(params, audio, visual)
    text_normed = l2_normalize_rows(text_embeddings)
    if fusion == FUSION_FEA_AVG:
        mixed = 0.5 * (out_a + out_v)
        return _stream_forward(mixed, text_normed, tau)["probs"]
    pa = _stream_forward(out_a, text_normed, tau)["probs"]
    pv = _stream_forward(out_v, text_normed, tau)["probs"]
    return fuse(pa, pv, fusion)


def loss_and_grads(
    params: TemporalEncoderParams,
    audio: np.ndarray,
    visual: np.ndarray,
    target_one_hot: np.ndarray,
    text_embeddings: np.ndarray,
    fusion: str,
    tau: float,
    learn_tau: bool = False,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss plus gradients w.r.t. every trainable tensor for one sample."""
    out_a, out_v, blocks = temporal.forward_with_cache(params, audio, visual)
    text_normed = l2_normalize_rows(text_embeddings)

    if fusion == FUSION_FEA_AVG:
        mixed = 0.5 * (out_a + out_v)
        cache = _stream_forward(mixed, text_normed, tau)
        loss, dprobs = _ce_grad(cache["probs"], target_one_hot)
        dmixed, dtau = _stream_backward(dprobs, cache, text_normed, tau)
        d_out_a = 0.5 * dmixed
        d_out_v = 0.5 * dmixed
    else:
        cache_a = _stream_forward(out_a, text_normed, tau)
        cache_v = _stream_forward(out_v, text_normed, tau)
        fused = fuse(cache_a["probs"], cache_v["probs"], fusion)
        loss, dfused = _ce_grad(fused, target_one_hot)
        dpa, dpv = _fuse_grad(dfused, cache_a["probs"], cache_v["probs"], fused, fusion)
        d_out_a, dtau_a = _stream_backward(dpa, cache_a, text_normed, tau)
        d_out_v, dtau_v = _stream_backward(dpv, cache_v, text_normed, tau)
        dtau = dtau_a + dtau_v

    grads, _, _ = temporal.backward(params, blocks, d_out_a, d_out_v)
    if learn_tau:
        grads["temperature"] = np.array(dtau, dtype=np.float64)
    return loss, grads


class Adam:
    """Deterministic Adam with bias correction, one state slot per tensor."""

    def __init__(self, tensors: dict[str, np.ndarray], config: TrainConfig):
        self.lr = config.learning_rate
        self.beta1 = config.beta1
        self.beta2 = config.beta2
        self.eps = config.eps
        self.t = 0
        self.m = {name: np.zeros_like(arr) for name, arr in tensors.items()}
        self.v = {name: np.zeros_like(arr) for name, arr in tensors.items()}

    def step(self, tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name in self.m:
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / bc1
            v_hat = self.v[name] / bc2
            tensors[name] = tensors[name] - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def subsample_by_class(
    samples: Sequence[VideoSample], ratio: float, rng: np.random.Generator
) -> list[VideoSample]:
    """Seeded per-class subsampling: shuffle, then keep ceil(ratio * n_c)."""
    if not 0 < ratio <= 1:
        raise TrainingError(f"data_ratio must lie in (0, 1], got {ratio}")
    if ratio == 1.0:
        return list(samples)
    by_class: dict[str, list[VideoSample]] = {}
    for sample in samples:
        if sample.label is None:
            raise TrainingError(f"{sample.video_id}: training sample has no label")
        by_class.setdefault(sample.label.event_class, []).append(sample)
    kept: list[VideoSample] = []
    for class_name in sorted(by_class):
        group = by_class[class_name]
        order = rng.permutation(len(group))
        take = math.ceil(ratio * len(group))
        kept.extend(group[i] for i in order[:take])
    return kept


def _check_train_sample(sample: VideoSample, vocab: ClassVocabulary) -> None:
    if sample.label is None:
        raise TrainingError(f"{sample.video_id}: training sample has no label")
    cls = sample.label.event_class
    if cls != vocab.special and not vocab.is_seen(cls):
        raise TrainingError(
            f"{sample.video_id}: class {cls!r} is not a seen class; "
            "training data must be seen-only"
        )


def fit(
    params: TemporalEncoderParams,
    train_set: Sequence[VideoSample],
    seen_text: np.ndarray,
    vocab: ClassVocabulary,
    config: TrainConfig,
    val_fn: Callable[[TemporalEncoderParams], float] | None = None,
) -> FitResult:
    """Fine-tune the temporal encoder on seen-class data.

    ``seen_text`` must hold exactly the seen-class rows plus the special
    class, in seen-only vocabulary order: the function never sees unseen
    text embeddings. ``val_fn`` scores a parameter snapshot (typically
    the open-vocabulary validation Avg); when supplied, the best-scoring
    epoch's parameters are returned, otherwise the final ones.
    Deterministic for a fixed config seed.
    """
    if not train_set:
        raise TrainingError("empty training set")
    text = np.asarray(seen_text, dtype=np.float64)
    expected_rows = vocab.size(SCOPE_SEEN_ONLY)
    if text.ndim != 2 or text.shape[0] != expected_rows:
        raise ShapeError(
            f"seen text embeddings must have {expected_rows} rows "
            f"(seen classes + special), got shape {text.shape}"
        )
    for sample in train_set:
        _check_train_sample(sample, vocab)

    work = params.copy()
    if config.learn_temperature and "temperature" not in work.tensors:
        work.tensors["temperature"] = np.array(config.temperature, dtype=np.float64)

    rng = np.random.default_rng(config.seed)
    samples = subsample_by_class(train_set, config.data_ratio, rng)
    targets = [
        expand_one_hot(s.label, vocab, SCOPE_SEEN_ONLY) for s in samples  # type: ignore[arg-type]
    ]

    optimizer = Adam(work.tensors, config)
    trace: list[EpochRecord] = []
    best_epoch: int | None = None
    best_avg = -math.inf
    best_tensors = {name: arr.copy() for name, arr in work.tensors.items()}

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(samples))
        epoch_losses: list[float] = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            tau = float(work.tensors.get("temperature", config.temperature))
            accum: dict[str, np.ndarray] | None = None
            for idx in batch:
                sample = samples[idx]
                loss, grads = loss_and_grads(
                    work,
                    sample.audio.data,
                    sample.visual.data,
                    targets[idx],
                    text,
                    config.fusion,
                    tau,
                    learn_tau=config.learn_temperature,
                )
                epoch_losses.append(loss)
                if accum is None:
                    accum = grads
                else:
                    for name in accum:
                        accum[name] = accum[name] + grads[name]
            assert accum is not None
            scale = 1.0 / len(batch)
            for name in accum:
                accum[name] = accum[name] * scale
            optimizer.step(work.tensors, accum)
            if config.learn_temperature:
                work.tensors["temperature"] = np.maximum(
                    work.tensors["temperature"], MIN_TEMPERATURE
                )
        mean_loss = float(np.mean(epoch_losses))
        val_avg = None
        if val_fn is not None:
            val_avg = float(val_fn(work))
            if val_avg > best_avg:
                best_avg = val_avg
                best_epoch = epoch
                best_tensors = {name: arr.copy() for name, arr in work.tensors.items()}
        trace.append(EpochRecord(epoch=epoch, loss=mean_loss, val_avg=val_avg))

    if val_fn is not None and best_epoch is not None:
        final = TemporalEncoderParams(work.config, best_tensors)
    else:
        final = work
    return FitResult(params=final, trace=trace, best_epoch=best_epoch)


def infer(
    params: TemporalEncoderParams,
    audio: np.ndarray,
    visual: np.ndarray,
    text_full: np.ndarray,
    vocab: ClassVocabulary,
    fusion: str = FUSION_SQRT,
    temperature: float = 0.07,
    video_id: str = "",
) -> tuple[PredictionSequence, np.ndarray]:
    """Open-vocabulary inference: widened text set, same fusion as training.

    Returns the per-segment argmax prediction (ties to the lowest index)
    together with the full T x (C+1) fused probability matrix.
    """
    text = np.asarray(text_full, dtype=np.float64)
    if text.shape[0] != vocab.size(SCOPE_FULL):
        raise ShapeError(
            f"text embeddings have {text.shape[0]} rows but the full vocabulary "
            f"has {vocab.size(SCOPE_FULL)} classes"
        )
    tau = float(params.tensors.get("temperature", temperature))
    probs = fused_probabilities(params, audio, visual, text, fusion, tau)
    classes = np.argmax(probs, axis=1)
    return PredictionSequence(video_id=video_id, classes=tuple(int(c) for c in classes)), probs


def infer_samples(
    params: TemporalEncoderParams,
    samples: Sequence[VideoSample],
    text_full: np.ndarray,
    vocab: ClassVocabulary,
    fusion: str = FUSION_SQRT,
    temperature: float = 0.07,
) -> list[PredictionSequence]:
    preds = []
    for sample in samples:
        pred, _ = infer(
            params,
            sample.audio.data,
            sample.visual.data,
            text_full,
            vocab,
            fusion=fusion,
            temperature=temperature,
            video_id=sample.video_id,
        )
        preds.append(pred)
    return preds
