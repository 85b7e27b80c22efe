#!/usr/bin/env python3
# Set prediction on one frame: build the matching cost, solve it, and read the loss.

import numpy as np
import torch

from decoupled_sgg.criterion import SetCriterion
from decoupled_sgg.geometry import Box, giou, iou, relation_region
from decoupled_sgg.matching import brute_force_match, build_cost_matrix, hungarian
from decoupled_sgg.structures import FrameAnnotation, PredictionSet, Triplet

# boxes are (cx, cy, w, h), normalized to the frame
person = Box(0.30, 0.50, 0.20, 0.40)
cup = Box(0.38, 0.40, 0.10, 0.10)
print("iou", iou(person, cup), "giou", giou(person, cup))
print("union region", relation_region(person, cup))
print("mixture region, theta=0", relation_region(person, cup, "mixture", 0.0))

# two ground-truth triplets: person-holding-cup, person-near-table
table = Box(0.60, 0.75, 0.50, 0.30)
gt = FrameAnnotation((Triplet(person, 0, cup, 1, (0,)), Triplet(person, 0, table, 2, (1, 2))))

# four queries of made-up predictions; query 2 is close to triplet 0, query 0 to triplet 1
rng = np.random.default_rng(0)
n_q, n_obj, n_rel = 4, 3, 3
sub = torch.tensor([person.as_tuple(), [0.5, 0.5, 0.3, 0.3], person.as_tuple(), [0.8, 0.2, 0.1, 0.1]], dtype=torch.float64)
obj = torch.tensor([table.as_tuple(), [0.5, 0.5, 0.3, 0.3], cup.as_tuple(), [0.2, 0.8, 0.1, 0.1]], dtype=torch.float64)
logits = lambda: torch.tensor(rng.normal(size=(n_q, n_obj + 1)))  # noqa: E731
pred = PredictionSet(sub, obj, logits(), logits(), torch.tensor(rng.normal(size=(n_q, n_rel))))

cost = build_cost_matrix(pred, gt)
print("cost matrix (queries x triplets)\n", np.round(cost, 3))
a = hungarian(cost)
print("hungarian", a.pairs, "total", a.total_cost(cost))
print("brute force", brute_force_match(cost).pairs)

loss, assignment = SetCriterion()(pred, gt)
for name, value in loss._asdict().items():
    print(f"{name:>7} {value.item():.4f}")
