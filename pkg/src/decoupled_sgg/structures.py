"""Annotation and prediction containers shared by the matcher, loss, and metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import torch

from .errors import InvalidInputError
from .geometry import Box


class TripletClass(NamedTuple):
    subject: int
    object: int
    relation: int


@dataclass(frozen=True)
class Triplet:
    """One annotated subject-object pair. A pair may carry several relations."""

    subject_box: Box
    subject_label: int
    object_box: Box
    object_label: int
    relations: tuple[int, ...]

    def __post_init__(self):
        rels = tuple(sorted(set(int(r) for r in self.relations)))
        if not rels:
            raise InvalidInputError("a triplet needs at least one relation")
        object.__setattr__(self, "relations", rels)

    def classes(self) -> list[TripletClass]:
        return [TripletClass(self.subject_label, self.object_label, r) for r in self.relations]


@dataclass(frozen=True)
class FrameAnnotation:
    triplets: tuple[Triplet, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "triplets", tuple(self.triplets))

    def __len__(self):
        return len(self.triplets)

    def validate(self, num_objects: int, num_relations: int) -> None:
        for k, t in enumerate(self.triplets):
            for name, lab in (("subject", t.subject_label), ("object", t.object_label)):
                if not 0 <= lab < num_objects:
                    raise InvalidInputError(f"triplet {k}: {name} label {lab} outside [0, {num_objects})")
            for r in t.relations:
                if not 0 <= r < num_relations:
                    raise InvalidInputError(f"triplet {k}: relation {r} outside [0, {num_relations})")

    def classes(self) -> set[TripletClass]:
        return {c for t in self.triplets for c in t.classes()}


@dataclass
class VideoAnnotation:
    video_id: str
    frames: list[FrameAnnotation]
    width: int
    height: int

    def classes(self) -> set[TripletClass]:
        return set().union(*(f.classes() for f in self.frames)) if self.frames else set()


@dataclass
class PredictionSet:
    """Raw head outputs for one frame, one row per query.

    Boxes are center-form and unclamped. Class logits have ``num_objects + 1``
    columns, the last one being the no-triplet class. ``rel_boxes`` is ``None``
    for model variants without a relation-region head.
    """

    sub_boxes: torch.Tensor
    obj_boxes: torch.Tensor
    sub_logits: torch.Tensor
    obj_logits: torch.Tensor
    rel_logits: torch.Tensor
    rel_boxes: Optional[torch.Tensor] = None
    extras: dict = field(default_factory=dict)

    @property
    def num_queries(self) -> int:
        return self.obj_boxes.shape[0]

    @property
    def sub_probs(self) -> torch.Tensor:
        return self.sub_logits.softmax(-1)

    @property
    def obj_probs(self) -> torch.Tensor:
        return self.obj_logits.softmax(-1)

    @property
    def rel_probs(self) -> torch.Tensor:
        return self.rel_logits.sigmoid()

    def detach(self) -> PredictionSet:
        return PredictionSet(
            *(t.detach() for t in (self.sub_boxes, self.obj_boxes, self.sub_logits,
                                   self.obj_logits, self.rel_logits)),
            rel_boxes=None if self.rel_boxes is None else self.rel_boxes.detach(),
        )

    @classmethod
    def from_probs(cls, sub_boxes, obj_boxes, sub_probs, obj_probs, rel_probs, rel_boxes=None):
        """Build a prediction set from probabilities (tests and hand-made scenarios)."""
        t = lambda x: torch.as_tensor(x, dtype=torch.float64)  # noqa: E731
        eps = torch.finfo(torch.float64).tiny
        rel = t(rel_probs).clamp(1e-12, 1 - 1e-12)
        return cls(
            t(sub_boxes), t(obj_boxes),
            t(sub_probs).clamp_min(eps).log(), t(obj_probs).clamp_min(eps).log(),
            torch.log(rel) - torch.log1p(-rel),
            None if rel_boxes is None else t(rel_boxes),
        )
