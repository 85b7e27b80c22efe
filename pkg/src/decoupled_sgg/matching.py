"""Prediction-to-ground-truth matching.

The cost of assigning prediction ``i`` to ground truth ``j`` is::

    eta_b * (C_sb + C_ob + C_rb) + eta_o * C_o + eta_r * C_r

where each box cost is L1 over center-form coordinates plus ``1 - gIoU``,
``C_o`` is the negated probability of the true subject and object labels,
and ``C_r`` is the negated mean probability over the true relations. The
matrix only has real ground-truth columns; predictions left unassigned are
treated as the no-triplet class.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
import torch

from .errors import InvalidInputError
from .geometry import Box, giou, giou_t, relation_region
from .structures import FrameAnnotation, PredictionSet


class MatchWeights(NamedTuple):
    box: float = 1.0
    obj: float = 1.0
    rel: float = 1.0


@dataclass(frozen=True)
class Assignment:
    """Matched (prediction index, ground-truth index) pairs, sorted by ground truth."""

    pairs: tuple[tuple[int, int], ...]

    @property
    def pred_indices(self) -> list[int]:
        return [p for p, _ in self.pairs]

    @property
    def gt_indices(self) -> list[int]:
        return [g for _, g in self.pairs]

    def total_cost(self, cost: np.ndarray) -> float:
        return float(sum(cost[p, g] for p, g in self.pairs))

    def pred_for_gt(self) -> dict[int, int]:
        return {g: p for p, g in self.pairs}


def box_match_cost(pred_box: Box, gt_box: Box) -> float:
    l1 = sum(abs(p - g) for p, g in zip(pred_box.as_tuple(), gt_box.as_tuple()))
    return l1 + (1.0 - giou(pred_box, gt_box))


def class_match_cost(prob_vector: Sequence[float], gt_label: int) -> float:
    probs = np.asarray(prob_vector, dtype=np.float64)
    if abs(probs.sum() - 1.0) > 1e-6:
        raise InvalidInputError(f"class probabilities sum to {probs.sum()}, not 1")
    if not 0 <= gt_label < probs.size:
        raise InvalidInputError(f"label {gt_label} outside [0, {probs.size})")
    return -float(probs[gt_label])


def relation_match_cost(rel_probs: Sequence[float], gt_relations) -> float:
    rels = sorted(set(gt_relations))
    if not rels:
        raise InvalidInputError("ground-truth relation set is empty")
    probs = np.asarray(rel_probs, dtype=np.float64)
    if rels[0] < 0 or rels[-1] >= probs.size:
        raise InvalidInputError(f"relation index outside [0, {probs.size})")
    return -float(probs[rels].mean())


def gt_tensors(gt: FrameAnnotation, num_relations: int, region_mode: str = "union",
               theta: float = 0.0, dtype=torch.float64) -> dict[str, torch.Tensor]:
    """Stack a frame's ground truth into tensors (boxes, labels, multi-hot relations)."""
    n = len(gt)
    multi_hot = torch.zeros(n, num_relations, dtype=dtype)
    for j, t in enumerate(gt.triplets):
        multi_hot[j, list(t.relations)] = 1.0
    as_t = lambda boxes: torch.tensor([b.as_tuple() for b in boxes], dtype=dtype).reshape(n, 4)  # noqa: E731
    return {
        "sub_boxes": as_t([t.subject_box for t in gt.triplets]),
        "obj_boxes": as_t([t.object_box for t in gt.triplets]),
        "rel_boxes": as_t([relation_region(t.subject_box, t.object_box, region_mode, theta)
                           for t in gt.triplets]),
        "sub_labels": torch.tensor([t.subject_label for t in gt.triplets], dtype=torch.long),
        "obj_labels": torch.tensor([t.object_label for t in gt.triplets], dtype=torch.long),
        "relations": multi_hot,
    }


def _pairwise_box_cost(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    l1 = torch.cdist(pred, gt, p=1)
    return l1 + (1.0 - giou_t(pred[:, None], gt[None]))


@torch.no_grad()
def build_cost_matrix(pred_set: PredictionSet, gt_frame: FrameAnnotation,
                      weights: MatchWeights | tuple = MatchWeights(), subject_fixed: bool = False,
                      region_mode: str = "union", theta: float = 0.0) -> np.ndarray:
    """Return the ``num_queries x num_gt`` matching cost matrix.

    In subject-fixed mode the subject box and subject class outputs are never
    read, so they cannot influence the assignment.
    """
    w_box, w_obj, w_rel = weights
    obj_boxes = pred_set.obj_boxes.detach().double()
    rel_logits = pred_set.rel_logits.detach().double()
    gt = gt_tensors(gt_frame, rel_logits.shape[-1], region_mode, theta)

    box_cost = _pairwise_box_cost(obj_boxes, gt["obj_boxes"])
    obj_probs = pred_set.obj_logits.detach().double().softmax(-1)
    class_cost = -obj_probs[:, gt["obj_labels"]]
    if not subject_fixed:
        box_cost = box_cost + _pairwise_box_cost(pred_set.sub_boxes.detach().double(), gt["sub_boxes"])
        sub_probs = pred_set.sub_logits.detach().double().softmax(-1)
        class_cost = class_cost - sub_probs[:, gt["sub_labels"]]
    if pred_set.rel_boxes is not None:
        box_cost = box_cost + _pairwise_box_cost(pred_set.rel_boxes.detach().double(), gt["rel_boxes"])

    rel = gt["relations"]
    rel_cost = -(rel_logits.sigmoid() @ rel.T) / rel.sum(-1)

    cost = w_box * box_cost + w_obj * class_cost + w_rel * rel_cost
    return cost.numpy()


def hungarian(cost: np.ndarray) -> Assignment:
    """Minimum-cost assignment of every ground truth (column) to a distinct prediction (row).

    Shortest augmenting path with dual potentials, O(N_gt^2 * N_q). Among
    equally cheap candidates the search picks the lowest prediction index.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise InvalidInputError(f"cost matrix must be 2-D, got shape {cost.shape}")
    n_pred, n_gt = cost.shape
    if n_gt > n_pred:
        raise InvalidInputError(f"{n_gt} ground truths exceed {n_pred} predictions")
    if not np.isfinite(cost).all():
        raise InvalidInputError("cost matrix has non-finite entries")
    if n_gt == 0:
        return Assignment(())

    a = cost.T  # rows: ground truths, columns: predictions
    n, m = a.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    owner = np.zeros(m + 1, dtype=np.int64)  # owner[j]: 1-based row holding column j
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used[1:]
            cur = a[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[owner[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1

    pairs = sorted(((j - 1, int(owner[j]) - 1) for j in range(1, m + 1) if owner[j]), key=lambda pg: pg[1])
    return Assignment(tuple(pairs))


BRUTE_FORCE_MAX_GT = 8
BRUTE_FORCE_MAX_CANDIDATES = 5_000_000


@lru_cache(maxsize=64)
def _injections(n_pred: int, n_gt: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n_pred), n_gt)), dtype=np.int64).reshape(-1, n_gt)


def brute_force_match(cost: np.ndarray) -> Assignment:
    """Exact minimum by enumerating every injective ground-truth-to-prediction map."""
    cost = np.asarray(cost, dtype=np.float64)
    n_pred, n_gt = cost.shape
    if n_gt > n_pred:
        raise InvalidInputError(f"{n_gt} ground truths exceed {n_pred} predictions")
    if n_gt > BRUTE_FORCE_MAX_GT or math.perm(n_pred, n_gt) > BRUTE_FORCE_MAX_CANDIDATES:
        raise InvalidInputError(f"brute force refuses a {n_pred}x{n_gt} problem (too many assignments)")
    if n_gt == 0:
        return Assignment(())
    perms = _injections(n_pred, n_gt)
    totals = cost[perms, np.arange(n_gt)].sum(axis=1)
    best = perms[int(np.argmin(totals))]
    return Assignment(tuple((int(p), g) for g, p in enumerate(best)))
