import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from decoupled_sgg.errors import InvalidInputError
from decoupled_sgg.geometry import (Box, cxcywh_to_xyxy_np, giou, giou_t, intersection_box, iou,
                                    pairwise_iou_np, relation_region, union_box)

unit = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def boxes(draw):
    """Valid boxes whose corners lie inside the frame."""
    x0, x1 = sorted((draw(unit), draw(unit)))
    y0, y1 = sorted((draw(unit), draw(unit)))
    if x1 - x0 < 1e-3 or y1 - y0 < 1e-3:
        x0, x1, y0, y1 = 0.2, 0.4, 0.3, 0.7
    return Box.from_corners(x0, y0, x1, y1)


# ---- validation -----------------------------------------------------------

@pytest.mark.parametrize("vals", [(0.5, 0.5, 0.0, 0.2), (0.5, 0.5, 0.2, -0.1), (1.2, 0.5, 0.1, 0.1),
                                  (0.5, 0.5, 1.5, 0.1), (math.nan, 0.5, 0.1, 0.1)])
def test_invalid_boxes_rejected(vals):
    with pytest.raises(InvalidInputError):
        Box(*vals)


def test_clamped_makes_raw_output_valid():
    b = Box.clamped(-0.1, 1.3, 0.0, 2.0)
    assert b.as_tuple() == (0.0, 1.0, 1e-6, 1.0)


# ---- iou / giou examples -------------------------------------------------

def test_iou_identity_and_disjoint():
    a = Box(0.3, 0.3, 0.2, 0.2)
    assert iou(a, a) == 1.0
    assert iou(Box(0.1, 0.1, 0.1, 0.1), Box(0.9, 0.9, 0.1, 0.1)) == 0.0


def test_iou_offset_pair_matches_corner_oracle():
    a, b = (0.25, 0.25, 0.5, 0.5), (0.5, 0.5, 0.5, 0.5)
    expected = oracles.iou(a, b)
    assert expected == pytest.approx(1 / 7, abs=0)  # 0.0625 / 0.4375
    assert iou(Box(*a), Box(*b)) == pytest.approx(float(expected), abs=1e-15)


def test_giou_identity_and_touching():
    a = Box(0.4, 0.6, 0.3, 0.2)
    assert giou(a, a) == 1.0
    left, right = Box(0.25, 0.5, 0.5, 1.0), Box(0.75, 0.5, 0.5, 1.0)
    assert giou(left, right) == 0.0


def test_giou_far_boxes_negative_matches_oracle():
    a, b = (0.1, 0.1, 0.1, 0.1), (0.9, 0.9, 0.1, 0.1)
    expected = float(oracles.giou(a, b))
    assert expected < 0
    assert giou(Box(*a), Box(*b)) == pytest.approx(expected, abs=1e-15)


def test_degenerate_box_is_rejected_before_iou():
    with pytest.raises(InvalidInputError):
        iou(Box(0.5, 0.5, 0.1, 0.1), Box(0.5, 0.5, 0.0, 0.1))


# ---- union / intersection / relation region ------------------------------

def test_union_nested_and_identical():
    inner, outer = Box(0.5, 0.5, 0.1, 0.1), Box(0.5, 0.5, 0.6, 0.6)
    assert union_box(inner, outer) == outer
    assert union_box(outer, inner) == outer
    assert union_box(inner, inner) == inner


def test_union_of_corner_boxes_matches_oracle():
    a, b = (0.1, 0.1, 0.2, 0.2), (0.9, 0.9, 0.2, 0.2)
    expected = tuple(float(v) for v in oracles.union_box_center(a, b))
    got = union_box(Box(*a), Box(*b)).as_tuple()
    np.testing.assert_allclose(got, expected, atol=1e-15)


def test_intersection_of_disjoint_boxes_raises():
    with pytest.raises(InvalidInputError):
        intersection_box(Box(0.1, 0.1, 0.1, 0.1), Box(0.9, 0.9, 0.1, 0.1))


def test_relation_region_union_mode():
    s, o = Box(0.3, 0.3, 0.2, 0.2), Box(0.6, 0.7, 0.2, 0.3)
    assert relation_region(s, o, "union") == union_box(s, o)


def test_mixture_theta_zero_overlapping_gives_intersection():
    s, o = Box(0.4, 0.4, 0.4, 0.4), Box(0.6, 0.6, 0.4, 0.4)
    region = relation_region(s, o, "mixture", 0.0)
    np.testing.assert_allclose(region.as_tuple(), (0.5, 0.5, 0.2, 0.2), atol=1e-15)


def test_mixture_half_theta_low_iou_gives_union():
    s = (0.3, 0.5, 0.4, 0.4)
    o = (0.3 + 4 / 15, 0.5, 0.4, 0.4)  # shift chosen so the exact IoU is 1/5
    assert float(oracles.iou(s, o)) == pytest.approx(0.2, abs=1e-12)
    region = relation_region(Box(*s), Box(*o), "mixture", 0.5)
    assert region == union_box(Box(*s), Box(*o))


@pytest.mark.parametrize("theta", [-0.1, 1.0, 2.0])
def test_mixture_theta_out_of_range(theta):
    with pytest.raises(InvalidInputError):
        relation_region(Box(0.5, 0.5, 0.2, 0.2), Box(0.5, 0.5, 0.2, 0.2), "mixture", theta)


def test_unknown_region_mode():
    with pytest.raises(InvalidInputError):
        relation_region(Box(0.5, 0.5, 0.2, 0.2), Box(0.5, 0.5, 0.2, 0.2), "hull")


# ---- properties ----------------------------------------------------------

@settings(max_examples=300, deadline=None)
@given(boxes(), boxes())
def test_symmetry_and_ordering(a, b):
    assert iou(a, b) == iou(b, a)
    assert giou(a, b) == pytest.approx(giou(b, a), abs=1e-15)
    assert giou(a, b) <= iou(a, b)
    assert 0.0 <= iou(a, b) <= 1.0
    assert -1.0 < giou(a, b) <= 1.0


@settings(max_examples=300, deadline=None)
@given(boxes(), boxes())
def test_iou_agrees_with_exact_arithmetic(a, b):
    assert iou(a, b) == pytest.approx(float(oracles.iou(a.as_tuple(), b.as_tuple())), abs=1e-12)
    assert giou(a, b) == pytest.approx(float(oracles.giou(a.as_tuple(), b.as_tuple())), abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(boxes(), boxes())
def test_union_contains_both(a, b):
    u = union_box(a, b)
    tol = 1e-12
    ux0, uy0, ux1, uy1 = u.corners
    for box in (a, b):
        x0, y0, x1, y1 = box.corners
        assert ux0 <= x0 + tol and uy0 <= y0 + tol and x1 <= ux1 + tol and y1 <= uy1 + tol
    assert u.area >= max(a.area, b.area) - tol


@settings(max_examples=300, deadline=None)
@given(boxes(), boxes(), st.floats(0.0, 0.99))
def test_mixture_branch_determinism(a, b, theta):
    region = relation_region(a, b, "mixture", theta)
    if iou(a, b) <= theta:
        assert region == union_box(a, b)
    else:
        assert region == intersection_box(a, b)


@settings(max_examples=300, deadline=None)
@given(boxes())
def test_center_corner_round_trip_within_one_ulp(b):
    back = Box.from_corners(*b.corners)
    ulp = np.spacing(1.0)  # all coordinates are at most 1
    for x, y in zip(b.as_tuple(), back.as_tuple()):
        assert abs(x - y) <= ulp


# ---- batched helpers agree with the scalar functions ---------------------

def test_vectorized_helpers_match_scalar():
    rng = np.random.default_rng(3)
    corners = np.sort(rng.uniform(0, 1, size=(20, 2, 2)), axis=1)
    arr = np.stack([corners[:, :, 0].mean(1), corners[:, :, 1].mean(1),
                    np.diff(corners[:, :, 0], axis=1)[:, 0], np.diff(corners[:, :, 1], axis=1)[:, 0]], -1)
    bxs = [Box(*row) for row in arr]
    pw = pairwise_iou_np(arr, arr)
    gt = giou_t(torch.tensor(arr)[:, None], torch.tensor(arr)[None]).numpy()
    for i, a in enumerate(bxs):
        for j, b in enumerate(bxs):
            assert pw[i, j] == pytest.approx(iou(a, b), abs=1e-12)
            assert gt[i, j] == pytest.approx(giou(a, b), abs=1e-12)
    np.testing.assert_allclose(cxcywh_to_xyxy_np(arr)[0], bxs[0].corners, atol=0)
