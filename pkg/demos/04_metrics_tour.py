"""A tour of the three metrics on hand-made sequences.

Accuracy compares every segment, background included. Segment-level F1
drops background from the true-positive accounting. Event-level F1
merges consecutive identical predictions into spans and requires IoU
above 0.5 against a same-class ground-truth span, so it punishes sloppy
temporal boundaries hardest.
"""

from avloc import ClassVocabulary, LabelSequence, PredictionSequence, evaluate
from avloc.metrics import EventSpan, extract_events, match_events, span_iou

vocab = ClassVocabulary(seen=("dog_barking", "piano"), unseen=("fireworks",))
bg = vocab.special_index()
dog = vocab.class_index("dog_barking")

print("event extraction: maximal runs of identical non-background indices")
sequence = [dog, dog, bg, dog, dog, dog, bg, bg, bg, bg]
print(f"  sequence {sequence}")
for span in extract_events(sequence, bg):
    print(f"  -> class {span.class_index} covers [{span.start}, {span.end})")

print("\nIoU matching at the 0.5 threshold (strict)")
gt = EventSpan(dog, 0, 6)
for pred in (EventSpan(dog, 0, 5), EventSpan(dog, 0, 3), EventSpan(dog, 2, 8)):
    iou = span_iou(pred, gt)
    tp, fp, fn = match_events([pred], [gt])
    verdict = "match" if tp else "no match"
    print(f"  pred [{pred.start},{pred.end}) vs gt [0,6): IoU={iou:.2f} -> {verdict}")

print("\nscoped evaluation on a three-video dataset")
labels = [
    LabelSequence("v_dog", "dog_barking", (1, 1, 1, 1, 0, 0, 0, 0, 0, 0)),
    LabelSequence("v_piano", "piano", (0, 0, 0, 1, 1, 1, 1, 1, 1, 1)),
    LabelSequence("v_fire", "fireworks", (1, 1, 1, 1, 1, 1, 1, 1, 1, 1)),
]
fire = vocab.class_index("fireworks")
piano = vocab.class_index("piano")
preds = [
    PredictionSequence("v_dog", (dog, dog, dog, bg, bg, bg, bg, bg, bg, bg)),
    PredictionSequence("v_piano", (bg, bg, bg, piano, piano, piano, piano, piano, piano, piano)),
    PredictionSequence("v_fire", (fire,) * 6 + (bg,) * 4),
]
result = evaluate(preds, labels, vocab)
print(f"{'scope':8s}{'acc':>8s}{'seg_f1':>8s}{'eve_f1':>8s}{'avg':>8s}")
for scope in ("seen", "unseen", "total"):
    rep = result.reports[scope]
    print(f"{scope:8s}{rep.accuracy:8.3f}{rep.segment_f1:8.3f}{rep.event_f1:8.3f}{rep.avg:8.3f}")

print("\nper-class table")
for row in result.per_class:
    print(f"  {row.class_name:12s} ({row.scope}): acc={row.accuracy:.3f} "
          f"seg={row.segment_f1:.3f} eve={row.event_f1:.3f} videos={row.video_count}")
