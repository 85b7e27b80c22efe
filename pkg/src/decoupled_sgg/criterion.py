"""Training loss over matched predictions.

``total = l_giou * lambda_g + l_l1 * lambda_l + l_obj * lambda_o + l_rel * lambda_r``

Box terms cover subject, object, and relation-region boxes of matched
queries and are averaged over the number of ground truths in the frame.
``l_obj`` is softmax cross-entropy for subject and object labels with the
no-triplet class down-weighted. ``l_rel`` is binary cross-entropy on the
multi-hot relation vector; unmatched queries target all zeros.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import torch
import torch.nn.functional as F

from .errors import CapacityError, InvalidInputError
from .geometry import giou_t
from .matching import Assignment, MatchWeights, build_cost_matrix, gt_tensors, hungarian
from .structures import FrameAnnotation, PredictionSet, Triplet


class LossCoefficients(NamedTuple):
    giou: float = 1.0
    l1: float = 2.5
    obj: float = 1.0
    rel: float = 1.0


class LossBreakdown(NamedTuple):
    l_giou: torch.Tensor
    l_l1: torch.Tensor
    l_obj: torch.Tensor
    l_rel: torch.Tensor
    total: torch.Tensor

    def as_floats(self) -> dict[str, float]:
        return {k: float(v.detach()) for k, v in self._asdict().items()}

    def __add__(self, other):
        return LossBreakdown(*(a + b for a, b in zip(self, other)))


def pad_ground_truth(gt: FrameAnnotation, n_q: int) -> list[Optional[Triplet]]:
    """Real triplets followed by ``None`` (no-triplet) markers up to ``n_q`` entries."""
    if len(gt) > n_q:
        raise CapacityError(f"{len(gt)} ground-truth triplets exceed {n_q} query slots")
    return list(gt.triplets) + [None] * (n_q - len(gt))


def _check_assignment(assignment: Assignment, n_q: int, n_gt: int) -> None:
    preds, gts = assignment.pred_indices, assignment.gt_indices
    if any(not 0 <= p < n_q for p in preds) or any(not 0 <= g < n_gt for g in gts):
        raise InvalidInputError("assignment references an index out of range")
    if len(set(preds)) != len(preds) or sorted(gts) != list(range(n_gt)):
        raise InvalidInputError("assignment must match every ground truth to a distinct prediction")


def compute_loss(pred_set: PredictionSet, gt: FrameAnnotation, assignment: Assignment,
                 coeffs: LossCoefficients | tuple = LossCoefficients(), subject_fixed: bool = False,
                 no_object_weight: float = 0.1, region_mode: str = "union",
                 theta: float = 0.0) -> LossBreakdown:
    n_q = pred_set.num_queries
    n_gt = len(gt)
    _check_assignment(assignment, n_q, n_gt)
    lam_g, lam_l, lam_o, lam_r = coeffs
    dtype = pred_set.obj_boxes.dtype
    num_obj = pred_set.obj_logits.shape[-1] - 1
    num_rel = pred_set.rel_logits.shape[-1]
    target = gt_tensors(gt, num_rel, region_mode, theta, dtype=dtype)
    src = torch.as_tensor(assignment.pred_indices, dtype=torch.long)
    tgt = torch.as_tensor(assignment.gt_indices, dtype=torch.long)
    norm = max(n_gt, 1)

    kinds = [("obj_boxes", pred_set.obj_boxes)]
    if not subject_fixed:
        kinds.append(("sub_boxes", pred_set.sub_boxes))
    if pred_set.rel_boxes is not None:
        kinds.append(("rel_boxes", pred_set.rel_boxes))
    zero = pred_set.obj_boxes.sum() * 0
    l_l1, l_giou = zero, zero
    for key, boxes in kinds:
        p, g = boxes[src], target[key][tgt]
        l_l1 = l_l1 + (p - g).abs().sum() / norm
        l_giou = l_giou + (1.0 - giou_t(p, g)).sum() / norm

    class_weight = torch.ones(num_obj + 1, dtype=pred_set.obj_logits.dtype)
    class_weight[-1] = no_object_weight

    def class_loss(logits, labels):
        classes = torch.full((n_q,), num_obj, dtype=torch.long)
        classes[src] = labels[tgt]
        return F.cross_entropy(logits, classes, weight=class_weight)

    l_obj = class_loss(pred_set.obj_logits, target["obj_labels"])
    if not subject_fixed:
        l_obj = l_obj + class_loss(pred_set.sub_logits, target["sub_labels"])

    rel_target = torch.zeros_like(pred_set.rel_logits)
    rel_target[src] = target["relations"][tgt].to(rel_target.dtype)
    l_rel = F.binary_cross_entropy_with_logits(pred_set.rel_logits, rel_target, reduction="sum") / norm

    total = lam_g * l_giou + lam_l * l_l1 + lam_o * l_obj + lam_r * l_rel
    return LossBreakdown(l_giou, l_l1, l_obj, l_rel, total)


@dataclass
class SetCriterion:
    """Matching followed by the loss, with all knobs in one place."""

    match_weights: MatchWeights = MatchWeights()
    coeffs: LossCoefficients = LossCoefficients()
    subject_fixed: bool = False
    no_object_weight: float = 0.1
    region_mode: str = "union"
    theta: float = 0.0

    def match(self, pred_set: PredictionSet, gt: FrameAnnotation) -> Assignment:
        if len(gt) > pred_set.num_queries:
            raise CapacityError(f"{len(gt)} ground-truth triplets exceed {pred_set.num_queries} query slots")
        if len(gt) == 0:
            return Assignment(())
        cost = build_cost_matrix(pred_set, gt, self.match_weights, self.subject_fixed,
                                 self.region_mode, self.theta)
        return hungarian(cost)

    def __call__(self, pred_set: PredictionSet, gt: FrameAnnotation,
                 assignment: Optional[Assignment] = None) -> tuple[LossBreakdown, Assignment]:
        if assignment is None:
            assignment = self.match(pred_set, gt)
        loss = compute_loss(pred_set, gt, assignment, self.coeffs, self.subject_fixed,
                            self.no_object_weight, self.region_mode, self.theta)
        return loss, assignment

