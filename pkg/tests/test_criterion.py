import numpy as np
import pytest
import torch

import oracles
from decoupled_sgg.criterion import LossCoefficients, SetCriterion, compute_loss, pad_ground_truth
from decoupled_sgg.errors import CapacityError, InvalidInputError
from decoupled_sgg.geometry import union_box
from decoupled_sgg.matching import Assignment
from decoupled_sgg.structures import FrameAnnotation, PredictionSet
from test_matching import random_frame, random_preds


def as_lists(p: PredictionSet) -> dict:
    out = {k: getattr(p, k).tolist() for k in ("sub_boxes", "obj_boxes", "sub_logits", "obj_logits",
                                               "rel_logits")}
    out["rel_boxes"] = None if p.rel_boxes is None else p.rel_boxes.tolist()
    return out


def gt_lists(gt: FrameAnnotation):
    return [(t.subject_box.as_tuple(), t.subject_label, t.object_box.as_tuple(), t.object_label, t.relations)
            for t in gt.triplets]


def test_padding():
    rng = np.random.default_rng(0)
    assert pad_ground_truth(FrameAnnotation(), 3) == [None] * 3
    gt = random_frame(rng, 4)
    assert pad_ground_truth(gt, 4) == list(gt.triplets)
    two = random_frame(rng, 2)
    assert pad_ground_truth(two, 4) == [*two.triplets, None, None]
    with pytest.raises(CapacityError):
        pad_ground_truth(gt, 3)


@pytest.mark.parametrize("subject_fixed", [False, True])
@pytest.mark.parametrize("rel_boxes", [True, False])
def test_random_tiny_instance_matches_oracle(subject_fixed, rel_boxes):
    rng = np.random.default_rng(7)
    preds = random_preds(rng, 3, n_obj=2, n_rel=2, rel_boxes=rel_boxes)
    gt = random_frame(rng, 1, n_obj=2, n_rel=2)
    coeffs = LossCoefficients(0.7, 2.5, 1.3, 0.9)
    assignment = Assignment(((2, 0),))
    got = compute_loss(preds, gt, assignment, coeffs, subject_fixed=subject_fixed).as_floats()
    ref = oracles.loss_terms(as_lists(preds), gt_lists(gt), [(2, 0)], coeffs, subject_fixed=subject_fixed)
    for key in ref:
        assert got[key] == pytest.approx(ref[key], abs=1e-12), key


def test_oracle_with_several_ground_truths():
    rng = np.random.default_rng(8)
    preds, gt = random_preds(rng, 6), random_frame(rng, 3)
    loss, assignment = SetCriterion()(preds, gt)
    ref = oracles.loss_terms(as_lists(preds), gt_lists(gt), list(assignment.pairs), LossCoefficients())
    assert loss.total.item() == pytest.approx(ref["total"], abs=1e-12)


def test_perfect_prediction_limit():
    rng = np.random.default_rng(9)
    gt = random_frame(rng, 2)
    n_q, n_obj, n_rel = 4, 3, 3
    big = 60.0
    sub_l = torch.full((n_q, n_obj + 1), -big, dtype=torch.float64)
    obj_l = sub_l.clone()
    rel_l = torch.full((n_q, n_rel), -big, dtype=torch.float64)
    boxes = {k: torch.full((n_q, 4), 0.5, dtype=torch.float64) for k in ("s", "o", "r")}
    sub_l[2:, -1] = obj_l[2:, -1] = big
    for q, t in enumerate(gt.triplets):
        boxes["s"][q] = torch.tensor(t.subject_box.as_tuple())
        boxes["o"][q] = torch.tensor(t.object_box.as_tuple())
        boxes["r"][q] = torch.tensor(union_box(t.subject_box, t.object_box).as_tuple())
        sub_l[q, t.subject_label] = big
        obj_l[q, t.object_label] = big
        rel_l[q, list(t.relations)] = big
    preds = PredictionSet(boxes["s"], boxes["o"], sub_l, obj_l, rel_l, boxes["r"])
    loss = compute_loss(preds, gt, Assignment(((0, 0), (1, 1)))).as_floats()
    assert loss["l_giou"] == pytest.approx(0.0, abs=1e-12)
    assert loss["l_l1"] == pytest.approx(0.0, abs=1e-12)
    assert loss["l_obj"] < 1e-20
    assert loss["l_rel"] < 1e-20


def test_zero_coefficients():
    rng = np.random.default_rng(10)
    preds, gt = random_preds(rng, 4), random_frame(rng, 2)
    loss, _ = SetCriterion(coeffs=LossCoefficients(0, 0, 0, 0))(preds, gt)
    assert loss.total.item() == 0.0
    assert loss.l_obj.item() > 0


def test_empty_frame_has_only_no_object_terms():
    rng = np.random.default_rng(11)
    preds = random_preds(rng, 3)
    loss, assignment = SetCriterion()(preds, FrameAnnotation())
    assert assignment.pairs == ()
    assert loss.l_l1.item() == 0.0 and loss.l_giou.item() == 0.0
    ref = oracles.loss_terms(as_lists(preds), [], [], LossCoefficients())
    assert loss.total.item() == pytest.approx(ref["total"], abs=1e-12)


def test_bad_assignment_rejected():
    rng = np.random.default_rng(12)
    preds, gt = random_preds(rng, 3), random_frame(rng, 2)
    for pairs in [((0, 0), (5, 1)), ((0, 0), (0, 1)), ((0, 0),), ((0, 0), (1, 2))]:
        with pytest.raises(InvalidInputError):
            compute_loss(preds, gt, Assignment(pairs))


def test_ground_truth_permutation_invariance():
    rng = np.random.default_rng(13)
    crit = SetCriterion()
    for _ in range(50):
        n_gt = int(rng.integers(1, 5))
        preds, gt = random_preds(rng, 6), random_frame(rng, n_gt)
        perm = rng.permutation(n_gt)
        shuffled = FrameAnnotation(tuple(gt.triplets[i] for i in perm))
        a = crit(preds, gt)[0].total.item()
        b = crit(preds, shuffled)[0].total.item()
        assert abs(a - b) < 1e-9


def test_linear_in_each_coefficient():
    rng = np.random.default_rng(14)
    preds, gt = random_preds(rng, 5), random_frame(rng, 3)
    assignment = SetCriterion().match(preds, gt)
    parts = compute_loss(preds, gt, assignment).as_floats()
    for k in range(4):
        for lam in (0.0, 0.5, 3.0):
            c = [1.0, 2.5, 1.0, 1.0]
            c[k] = lam
            total = compute_loss(preds, gt, assignment, c).total.item()
            terms = [parts["l_giou"], parts["l_l1"], parts["l_obj"], parts["l_rel"]]
            assert total == pytest.approx(sum(ci * ti for ci, ti in zip(c, terms)), abs=1e-12)


def test_subject_fixed_ignores_subject_outputs():
    rng = np.random.default_rng(15)
    preds, gt = random_preds(rng, 5), random_frame(rng, 2)
    for t in (preds.sub_boxes, preds.sub_logits, preds.obj_boxes):
        t.requires_grad_(True)
    crit = SetCriterion(subject_fixed=True)
    loss, assignment = crit(preds, gt)
    loss.total.backward()
    assert preds.sub_boxes.grad is None or not preds.sub_boxes.grad.any()
    assert preds.sub_logits.grad is None or not preds.sub_logits.grad.any()
    assert preds.obj_boxes.grad.abs().sum() > 0
    with torch.no_grad():
        preds.sub_boxes.uniform_(0.1, 0.9)
        preds.sub_logits.normal_()
    again, same = crit(preds, gt)
    assert same == assignment
    assert again.total.item() == loss.total.item()


def test_float32_boxes_with_float64_logits():
    rng = np.random.default_rng(4)
    gt = random_frame(rng, 2)
    pred = random_preds(rng, 4)
    mixed = PredictionSet(pred.sub_boxes.float(), pred.obj_boxes.float(), pred.sub_logits, pred.obj_logits,
                          pred.rel_logits, pred.rel_boxes.float())
    a = SetCriterion()(pred, gt)[0].total.item()
    b = SetCriterion()(mixed, gt)[0].total.item()
    assert b == pytest.approx(a, abs=1e-5)
