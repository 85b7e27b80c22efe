"""SGDet evaluation: Recall@K and seen/unseen/full mAP.

A detection is correct when its subject and object boxes both reach the IoU
threshold against a ground-truth pair and all three labels agree. Each
relation of an annotated pair is a separate ground-truth instance, and each
instance can be claimed by one detection only.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Collection, Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .geometry import iou
from .inference import TripletPrediction, top_k
from .structures import FrameAnnotation, TripletClass

log = logging.getLogger(__name__)

PARTITIONS = ("unseen", "seen", "full")


def match_prediction(pred: TripletPrediction, gts: FrameAnnotation, iou_threshold: float = 0.5,
                     claimed: Optional[set] = None) -> Optional[int]:
    """Index of the ground-truth pair ``pred`` matches, or None.

    ``claimed`` holds ``(pair index, relation)`` instances already taken by
    higher-scored detections; the match is added to it. Among several
    eligible pairs the one with the largest worse-of-two IoU wins.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise InvalidInputError(f"IoU threshold must lie in (0, 1], got {iou_threshold}")
    claimed = set() if claimed is None else claimed
    best, best_iou = None, -1.0
    for j, gt in enumerate(gts.triplets):
        if (gt.subject_label != pred.subject_label or gt.object_label != pred.object_label
                or pred.relation_label not in gt.relations or (j, pred.relation_label) in claimed):
            continue
        overlap = min(iou(pred.subject_box, gt.subject_box), iou(pred.object_box, gt.object_box))
        if overlap >= iou_threshold and overlap > best_iou:
            best, best_iou = j, overlap
    if best is not None:
        claimed.add((best, pred.relation_label))
    return best


def _gt_instances(gts: FrameAnnotation, classes: Optional[Collection[TripletClass]]) -> int:
    return sum(1 for t in gts.triplets for c in t.classes() if classes is None or c in classes)


def recall_at_k(preds: Sequence[Sequence[TripletPrediction]], gts: Sequence[FrameAnnotation], k: int,
                iou_threshold: float = 0.5, classes: Optional[Collection[TripletClass]] = None) -> float:
    """Micro-averaged recall of ground-truth instances hit by each frame's top-``k`` detections.

    ``classes`` restricts the ground-truth instances counted (e.g. to unseen
    triplet classes); detections are not filtered. Returns NaN when no
    instance is counted.

    Example: one frame whose single pair carries two relations has two
    instances; a correct top-1 detection for one of them gives 0.5 at K=1.
    """
    if k <= 0:
        raise InvalidInputError("K must be positive")
    if len(preds) != len(gts):
        raise InvalidInputError(f"{len(preds)} prediction frames vs {len(gts)} ground-truth frames")
    hit = total = 0
    for frame_preds, frame_gts in zip(preds, gts):
        total += _gt_instances(frame_gts, classes)
        claimed: set = set()
        for p in top_k(frame_preds, k) if frame_preds else ():
            j = match_prediction(p, frame_gts, iou_threshold, claimed)
            if j is not None and (classes is None or TripletClass(p.subject_label, p.object_label,
                                                                  p.relation_label) in classes):
                hit += 1
    return hit / total if total else float("nan")


def average_precision(tp: np.ndarray, num_gt: int) -> float:
    """All-point interpolated area under the precision-recall curve of a ranked TP/FP list.

    Example: one ground truth with detections ranked [wrong, correct] gives
    ``tp = [0, 1]``, precision 0.5 at recall 1, and AP 0.5.
    """
    if num_gt == 0:
        return float("nan")
    if tp.size == 0:
        return 0.0
    ctp = np.cumsum(tp)
    recall = ctp / num_gt
    precision = ctp / np.arange(1, tp.size + 1)
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


@dataclass
class MAPResult:
    unseen: float
    seen: float
    full: float
    per_class: dict[TripletClass, float] = field(default_factory=dict)
    gt_counts: dict[TripletClass, int] = field(default_factory=dict)


def _mean(values):
    values = list(values)
    return float(np.mean(values)) if values else float("nan")


def mean_average_precision(preds: Sequence[Sequence[TripletPrediction]], gts: Sequence[FrameAnnotation],
                           seen: Collection[TripletClass], unseen: Collection[TripletClass],
                           iou_threshold: float = 0.5) -> MAPResult:
    """Per-class AP over the whole corpus, averaged over unseen, seen, and all evaluated classes.

    Classes without ground truth are left out of every mean, as are
    ground-truth classes in neither ``seen`` nor ``unseen``.
    """
    if len(preds) != len(gts):
        raise InvalidInputError(f"{len(preds)} prediction frames vs {len(gts)} ground-truth frames")
    seen, unseen = set(seen), set(unseen)
    gt_counts: dict[TripletClass, int] = defaultdict(int)
    for frame in gts:
        for t in frame.triplets:
            for c in t.classes():
                gt_counts[c] += 1

    by_class: dict[TripletClass, list] = defaultdict(list)
    for f, frame_preds in enumerate(preds):
        for p in frame_preds:
            by_class[TripletClass(p.subject_label, p.object_label, p.relation_label)].append((f, p))

    per_class = {}
    for c, n_gt in gt_counts.items():
        if c not in seen and c not in unseen:
            log.info("class %s has ground truth but is neither seen nor unseen; not evaluated", c)
            continue
        ranked = sorted(by_class.get(c, []), key=lambda fp: (-fp[1].score, fp[0], fp[1].query))
        claimed: dict[int, set] = defaultdict(set)
        tp = np.array([match_prediction(p, gts[f], iou_threshold, claimed[f]) is not None
                       for f, p in ranked], dtype=np.float64)
        per_class[c] = average_precision(tp, n_gt)

    for name, part in (("unseen", unseen), ("seen", seen)):
        missing = [c for c in part if c not in gt_counts]
        if missing:
            log.info("%d %s classes have no ground truth and are excluded", len(missing), name)
    return MAPResult(
        unseen=_mean(ap for c, ap in per_class.items() if c in unseen),
        seen=_mean(ap for c, ap in per_class.items() if c in seen),
        full=_mean(per_class.values()),
        per_class=per_class,
        gt_counts=dict(gt_counts),
    )


@dataclass
class EvalReport:
    recall: dict[str, dict[int, float]]  # partition -> K -> recall
    map: MAPResult
    ks: tuple[int, ...]
    seen: frozenset = frozenset()
    unseen: frozenset = frozenset()

    def to_json(self) -> str:
        def num(x):
            return None if x is None or (isinstance(x, float) and np.isnan(x)) else round(float(x), 10)
        body = {
            "recall": {part: {str(k): num(v) for k, v in sorted(r.items())} for part, r in self.recall.items()},
            "map": {part: num(getattr(self.map, part)) for part in PARTITIONS},
            "num_classes": {
                "unseen": sum(1 for c in self.map.per_class if c in self.unseen),
                "seen": sum(1 for c in self.map.per_class if c in self.seen),
                "full": len(self.map.per_class),
            },
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"

    def class_table(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["subject", "object", "relation", "gt_count", "ap", "partition"])
        for c in sorted(self.map.gt_counts):
            part = "unseen" if c in self.unseen else "seen" if c in self.seen else "none"
            ap = self.map.per_class.get(c)
            writer.writerow([c.subject, c.object, c.relation, self.map.gt_counts[c],
                             "" if ap is None else f"{ap:.10f}", part])
        return buf.getvalue()


def evaluate(preds: Sequence[Sequence[TripletPrediction]], gts: Sequence[FrameAnnotation],
             seen: Collection[TripletClass], unseen: Collection[TripletClass],
             ks: Sequence[int] = (20, 50), iou_threshold: float = 0.5) -> EvalReport:
    seen, unseen = frozenset(seen), frozenset(unseen)
    recall = {
        "full": {k: recall_at_k(preds, gts, k, iou_threshold) for k in ks},
        "seen": {k: recall_at_k(preds, gts, k, iou_threshold, seen) for k in ks},
        "unseen": {k: recall_at_k(preds, gts, k, iou_threshold, unseen) for k in ks},
    }
    return EvalReport(recall, mean_average_precision(preds, gts, seen, unseen, iou_threshold),
                      tuple(ks), seen, unseen)
