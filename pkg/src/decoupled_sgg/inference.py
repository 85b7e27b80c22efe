"""Turn raw per-query outputs into scored relationship-triplet detections.

Query ``q`` pairs its subject box with its own object box. Each box takes the
arg-max real class (the no-triplet column is ignored) and every relation
``r`` yields one candidate scored ``rel_prob[q, r] * sub_max[q] * obj_max[q]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np
import torch

from .errors import InvalidInputError
from .geometry import Box
from .structures import PredictionSet


@dataclass(frozen=True)
class TripletPrediction:
    subject_box: Box
    subject_label: int
    object_box: Box
    object_label: int
    relation_label: int
    score: float
    frame_index: int = 0
    query: int = 0

    def to_record(self, video_id: str) -> dict:
        return {
            "video_id": video_id,
            "frame": self.frame_index,
            "subject_box": list(self.subject_box.corners),
            "subject_label": self.subject_label,
            "object_box": list(self.object_box.corners),
            "object_label": self.object_label,
            "relation_label": self.relation_label,
            "score": self.score,
        }


def compose_triplets(pred: PredictionSet, subject_fixed: bool = False, subject_class: int = 0,
                     frame_index: int = 0) -> list[TripletPrediction]:
    """All ``num_queries * num_relations`` candidates of one frame, in (query, relation) order.

    With ``subject_fixed`` the subject confidence is 1 and its label is ``subject_class``.
    The relation-region boxes are not used.
    """
    with torch.no_grad():
        obj_probs = pred.obj_probs[:, :-1].double().numpy()
        rel_probs = pred.rel_probs.double().numpy()
        obj_boxes = pred.obj_boxes.double().numpy()
        sub_boxes = pred.sub_boxes.double().numpy()
        n_q = obj_probs.shape[0]
        if subject_fixed:
            sub_labels = np.full(n_q, subject_class)
            sub_max = np.ones(n_q)
        else:
            sub_probs = pred.sub_probs[:, :-1].double().numpy()
            sub_labels = sub_probs.argmax(-1)
            sub_max = sub_probs.max(-1)
    obj_labels = obj_probs.argmax(-1)
    obj_max = obj_probs.max(-1)
    scores = rel_probs * sub_max[:, None] * obj_max[:, None]

    out = []
    for q in range(n_q):
        sb = Box.clamped(*sub_boxes[q])
        ob = Box.clamped(*obj_boxes[q])
        for r in range(scores.shape[1]):
            out.append(TripletPrediction(sb, int(sub_labels[q]), ob, int(obj_labels[q]), r,
                                         float(scores[q, r]), frame_index, q))
    return out


def top_k(candidates: Iterable[TripletPrediction], k: int) -> list[TripletPrediction]:
    """Highest-scoring ``k`` candidates; ties go to the lower (query, relation) index."""
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    ranked = sorted(candidates, key=lambda c: (-c.score, c.query, c.relation_label))
    return ranked[:k]


def dump_predictions(fp: IO[str], video_id: str, preds: Iterable[TripletPrediction]) -> None:
    """Append one JSON line per prediction (corner-form normalized boxes)."""
    for p in preds:
        fp.write(json.dumps(p.to_record(video_id), sort_keys=True) + "\n")
