"""Segment accuracy, segment-level F1, event-level F1 with IoU matching.

The three metrics plus their arithmetic mean ("avg") are reported per
scope (seen / unseen / total) and optionally per ground-truth class.
Background never forms an event: it is excluded from both F1 counts but
participates in segment accuracy.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .core import SCOPE_FULL, ClassVocabulary, LabelSequence, PredictionSequence, label_indices
from .errors import EvaluationError

IOU_THRESHOLD = 0.5

SCOPE_SEEN = "seen"
SCOPE_UNSEEN = "unseen"
SCOPE_TOTAL = "total"
REPORT_SCOPES = (SCOPE_SEEN, SCOPE_UNSEEN, SCOPE_TOTAL)


class EventSpan(NamedTuple):
    """Maximal run of identical non-background predictions, end exclusive."""

    class_index: int
    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start


class EventCounts(NamedTuple):
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class MetricReport:
    """One scope's metric bundle; ``avg`` is the mean of the three scores."""

    scope: str
    accuracy: float
    segment_f1: float
    event_f1: float
    avg: float
    video_count: int

    def to_dict(self) -> dict:
        return {
            "scope": self.scope,
            "accuracy": self.accuracy,
            "segment_f1": self.segment_f1,
            "event_f1": self.event_f1,
            "avg": self.avg,
            "video_count": self.video_count,
        }


@dataclass(frozen=True)
class ClassReport:
    class_name: str
    scope: str
    accuracy: float
    segment_f1: float
    event_f1: float
    video_count: int


@dataclass(frozen=True)
class EvaluationResult:
    """Seen/unseen/total reports plus the per-class breakdown.

    A scope with zero videos maps to ``None`` rather than fabricated
    numbers.
    """

    reports: dict[str, MetricReport | None]
    per_class: tuple[ClassReport, ...]

    def to_dict(self) -> dict:
        payload: dict = {}
        for scope in REPORT_SCOPES:
            report = self.reports.get(scope)
            payload[scope] = {"empty": True} if report is None else report.to_dict()
        payload["per_class"] = [
            {
                "class": c.class_name,
                "scope": c.scope,
                "accuracy": c.accuracy,
                "segment_f1": c.segment_f1,
                "event_f1": c.event_f1,
                "video_count": c.video_count,
            }
            for c in self.per_class
        ]
        return payload

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    def save_per_class_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["class", "scope", "acc", "seg_f1", "eve_f1", "video_count"])
            for c in self.per_class:
                writer.writerow(
                    [
                        c.class_name,
                        c.scope,
                        f"{c.accuracy:.6f}",
                        f"{c.segment_f1:.6f}",
                        f"{c.event_f1:.6f}",
                        c.video_count,
                    ]
                )


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    """F1 with the zero-support convention: 1.0 when nothing to detect."""
    if tp == 0 and fp == 0 and fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def extract_events(classes: Sequence[int], special_index: int) -> list[EventSpan]:
    """Maximal runs of identical non-special indices, ordered by start."""
    spans: list[EventSpan] = []
    start = 0
    seq = list(classes)
    for t in range(1, len(seq) + 1):
        if t == len(seq) or seq[t] != seq[start]:
            if seq[start] != special_index:
                spans.append(EventSpan(seq[start], start, t))
            start = t
    return spans


def span_iou(a: EventSpan, b: EventSpan) -> float:
    inter = max(0, min(a.end, b.end) - max(a.start, b.start))
    union = a.length + b.length - inter
    return inter / union


def match_events(
    pred_spans: Sequence[EventSpan],
    gt_spans: Sequence[EventSpan],
    iou_threshold: float = IOU_THRESHOLD,
    strict: bool = True,
) -> EventCounts:
    """Greedy one-to-one matching of same-class spans in descending IoU order.

    A pair counts as a true positive only when its IoU clears the
    threshold (strictly by default). Unmatched predictions are false
    positives, unmatched ground-truth spans false negatives.
    """
    candidates = []
    for pi, p in enumerate(pred_spans):
        for gi, g in enumerate(gt_spans):
            if p.class_index != g.class_index:
                continue
            iou = span_iou(p, g)
            above = iou > iou_threshold if strict else iou >= iou_threshold
            if above:
                candidates.append((-iou, p.start, g.start, pi, gi))
    candidates.sort()
    used_pred: set[int] = set()
    used_gt: set[int] = set()
    tp = 0
    for _, _, _, pi, gi in candidates:
        if pi in used_pred or gi in used_gt:
            continue
        used_pred.add(pi)
        used_gt.add(gi)
        tp += 1
    return EventCounts(tp=tp, fp=len(pred_spans) - tp, fn=len(gt_spans) - tp)


def _pair_sequences(
    preds: Iterable[PredictionSequence],
    labels: Iterable[LabelSequence],
    vocab: ClassVocabulary,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Align predictions with labels by video id; both sets must coincide."""
    pred_list = list(preds)
    label_list = list(labels)
    pred_map = {p.video_id: p for p in pred_list}
    label_map = {l.video_id: l for l in label_list}
    if len(pred_map) != len(pred_list):
        raise EvaluationError("duplicate video ids in prediction set")
    if len(label_map) != len(label_list):
        raise EvaluationError("duplicate video ids in label set")
    missing = sorted(set(label_map) - set(pred_map))
    extra = sorted(set(pred_map) - set(label_map))
    if missing or extra:
        raise EvaluationError(
            f"video sets differ: missing predictions for {missing[:5]}, "
            f"unexpected predictions for {extra[:5]}"
        )
    pairs = []
    for vid in sorted(label_map):
        pred = pred_map[vid]
        pred.validate(vocab)
        gt = label_indices(label_map[vid], vocab, SCOPE_FULL)
        if len(pred.classes) != len(gt):
            raise EvaluationError(
                f"{vid}: prediction has {len(pred.classes)} segments, label has {len(gt)}"
            )
        pairs.append((np.asarray(pred.classes, dtype=np.int64), gt))
    return pairs


def accuracy(
    preds: Iterable[PredictionSequence],
    labels: Iterable[LabelSequence],
    vocab: ClassVocabulary,
) -> float:
    """Fraction of all segments (background included) predicted exactly."""
    pairs = _pair_sequences(preds, labels, vocab)
    total = sum(len(gt) for _, gt in pairs)
    if total == 0:
        raise EvaluationError("no segments to score")
    hits = sum(int(np.sum(pred == gt)) for pred, gt in pairs)
    return hits / total


def segment_counts(
    preds: Iterable[PredictionSequence],
    labels: Iterable[LabelSequence],
    vocab: ClassVocabulary,
) -> EventCounts:
    """Segment-level TP/FP/FN with background excluded from all three."""
    special = vocab.special_index(SCOPE_FULL)
    tp = fp = fn = 0
    for pred, gt in _pair_sequences(preds, labels, vocab):
        tp += int(np.sum((pred == gt) & (pred != special)))
        fp += int(np.sum((pred != special) & (pred != gt)))
        fn += int(np.sum((gt != special) & (pred != gt)))
    return EventCounts(tp, fp, fn)


def segment_f1(
    preds: Iterable[PredictionSequence],
    labels: Iterable[LabelSequence],
    vocab: ClassVocabulary,
) -> float:
    return f1_from_counts(*segment_counts(preds, labels, vocab))


def event_counts(
    preds: Iterable[PredictionSequence],
    labels: Iterable[LabelSequence],
    vocab: ClassVocabulary,
    iou_threshold: float = IOU_THRESHOLD,
    strict: bool = True,
) -> EventCounts:
    """Event-level TP/FP/FN aggregated over the whole dataset."""
    special = vocab.special_index(SCOPE_FULL)
    tp = fp = fn = 0
    for pred, gt in _pair_sequences(preds, labels, vocab):
        counts = match_events(
            extract_events(pred, special),
            extract_events(gt, special),
            iou_threshold=iou_threshold,
            strict=strict,
        )
        tp += counts.tp
        fp += counts.fp
        fn += counts.fn
    return EventCounts(tp, fp, fn)


def event_f1(
    preds: Iterable[PredictionSequence],
    labels: Iterable[LabelSequence],
    vocab: ClassVocabulary,
    iou_threshold: float = IOU_THRESHOLD,
    strict: bool = True,
) -> float:
    return f1_from_counts(*event_counts(preds, labels, vocab, iou_threshold, strict))


def compute_report(
    scope: str,
    preds: Sequence[PredictionSequence],
    labels: Sequence[LabelSequence],
    vocab: ClassVocabulary,
    iou_threshold: float = IOU_THRESHOLD,
    strict: bool = True,
) -> MetricReport | None:
    if not labels:
        return None
    acc = accuracy(preds, labels, vocab)
    seg = segment_f1(preds, labels, vocab)
    eve = event_f1(preds, labels, vocab, iou_threshold, strict)
    return MetricReport(
        scope=scope,
        accuracy=acc,
        segment_f1=seg,
        event_f1=eve,
        avg=(acc + seg + eve) / 3.0,
        video_count=len(labels),
    )


def evaluate(
    preds: Sequence[PredictionSequence],
    labels: Sequence[LabelSequence],
    vocab: ClassVocabulary,
    scope_of: Mapping[str, str] | None = None,
    iou_threshold: float = IOU_THRESHOLD,
    strict: bool = True,
) -> EvaluationResult:
    """Score predictions per scope (seen / unseen / total) and per class.

    ``scope_of`` maps video ids to "seen"/"unseen"; when omitted the scope
    is derived from each label's event class. Every video must be
    assignable to exactly one scope; the total report is recomputed over
    the union, never averaged from the sub-scopes.
    """
    label_map = {l.video_id: l for l in labels}
    if len(label_map) != len(labels):
        raise EvaluationError("duplicate video ids in label set")

    def derive_scope(label: LabelSequence) -> str:
        if vocab.is_seen(label.event_class):
            return SCOPE_SEEN
        if vocab.is_unseen(label.event_class):
            return SCOPE_UNSEEN
        raise EvaluationError(
            f"{label.video_id}: event class {label.event_class!r} cannot be "
            "assigned to the seen or unseen scope"
        )

    scopes: dict[str, str] = {}
    for label in labels:
        if scope_of is not None:
            if label.video_id not in scope_of:
                raise EvaluationError(f"{label.video_id}: missing from the scope assignment")
            scope = scope_of[label.video_id]
            if scope not in (SCOPE_SEEN, SCOPE_UNSEEN):
                raise EvaluationError(
                    f"{label.video_id}: scope must be seen or unseen, got {scope!r}"
                )
        else:
            scope = derive_scope(label)
        scopes[label.video_id] = scope

    pred_map = {p.video_id: p for p in preds}
    if set(pred_map) != set(label_map):
        raise EvaluationError("prediction and label video sets differ")

    def subset(video_ids: list[str]) -> tuple[list[PredictionSequence], list[LabelSequence]]:
        return [pred_map[v] for v in video_ids], [label_map[v] for v in video_ids]

    seen_ids = sorted(v for v, s in scopes.items() if s == SCOPE_SEEN)
    unseen_ids = sorted(v for v, s in scopes.items() if s == SCOPE_UNSEEN)
    all_ids = sorted(scopes)

    reports = {
        SCOPE_SEEN: compute_report(SCOPE_SEEN, *subset(seen_ids), vocab, iou_threshold, strict),
        SCOPE_UNSEEN: compute_report(
            SCOPE_UNSEEN, *subset(unseen_ids), vocab, iou_threshold, strict
        ),
        SCOPE_TOTAL: compute_report(SCOPE_TOTAL, *subset(all_ids), vocab, iou_threshold, strict),
    }

    per_class: list[ClassReport] = []
    by_class: dict[str, list[str]] = {}
    for label in labels:
        by_class.setdefault(label.event_class, []).append(label.video_id)
    for class_name in vocab.classes(SCOPE_FULL):
        if class_name not in by_class:
            continue
        ids = sorted(by_class[class_name])
        sub_preds, sub_labels = subset(ids)
        report = compute_report("class", sub_preds, sub_labels, vocab, iou_threshold, strict)
        assert report is not None
        per_class.append(
            ClassReport(
                class_name=class_name,
                scope=scopes[ids[0]],
                accuracy=report.accuracy,
                segment_f1=report.segment_f1,
                event_f1=report.event_f1,
                video_count=len(ids),
            )
        )
    return EvaluationResult(reports=reports, per_class=tuple(per_class))
