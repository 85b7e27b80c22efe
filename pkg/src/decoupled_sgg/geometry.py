"""Box algebra.

Boxes are stored in normalized center form ``(cx, cy, w, h)``. Corner form
``(x0, y0, x1, y1)`` is derived on demand. The scalar functions operate on
:class:`Box` values; the ``*_t`` helpers at the bottom are batched torch
versions used by the matching cost and the training loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
import torch

from .errors import InvalidInputError

RegionMode = Literal["union", "mixture"]


@dataclass(frozen=True)
class Box:
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInputError(f"non-finite box {vals}")
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise InvalidInputError(f"box center outside [0,1]: {vals}")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise InvalidInputError(f"degenerate or oversized box extent: {vals}")

    @classmethod
    def from_corners(cls, x0: float, y0: float, x1: float, y1: float) -> Box:
        return cls((x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0)

    @classmethod
    def clamped(cls, cx: float, cy: float, w: float, h: float, min_size: float = 1e-6) -> Box:
        """Build a valid box from raw head output by clamping into range."""
        clip = lambda v, lo: min(max(float(v), lo), 1.0)  # noqa: E731
        return cls(clip(cx, 0.0), clip(cy, 0.0), clip(w, min_size), clip(h, min_size))

    @property
    def corners(self) -> tuple[float, float, float, float]:
        hw, hh = 0.5 * self.w, 0.5 * self.h
        return (self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh)

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h)

    def contains(self, other: Box) -> bool:
        x0, y0, x1, y1 = self.corners
        a0, b0, a1, b1 = other.corners
        return x0 <= a0 and y0 <= b0 and a1 <= x1 and b1 <= y1


def _intersection_corners(a: Box, b: Box) -> tuple[float, float, float, float]:
    ax0, ay0, ax1, ay1 = a.corners
    bx0, by0, bx1, by1 = b.corners
    return max(ax0, bx0), max(ay0, by0), min(ax1, bx1), min(ay1, by1)


def _corner_area(b: Box) -> float:
    # Same arithmetic as the intersection, so iou(a, a) is exactly 1.
    x0, y0, x1, y1 = b.corners
    return (x1 - x0) * (y1 - y0)


def _intersection_area(a: Box, b: Box) -> float:
    x0, y0, x1, y1 = _intersection_corners(a, b)
    return max(x1 - x0, 0.0) * max(y1 - y0, 0.0)


def iou(a: Box, b: Box) -> float:
    inter = _intersection_area(a, b)
    return inter / (_corner_area(a) + _corner_area(b) - inter)


def giou(a: Box, b: Box) -> float:
    """Generalized IoU: IoU minus the fraction of the enclosing box not covered by the union."""
    inter = _intersection_area(a, b)
    union = _corner_area(a) + _corner_area(b) - inter
    ax0, ay0, ax1, ay1 = a.corners
    bx0, by0, bx1, by1 = b.corners
    enclosing = (max(ax1, bx1) - min(ax0, bx0)) * (max(ay1, by1) - min(ay0, by0))
    # enclosing >= union exactly; rounding can flip the sign when they coincide
    return inter / union - max(enclosing - union, 0.0) / enclosing


def union_box(a: Box, b: Box) -> Box:
    ax0, ay0, ax1, ay1 = a.corners
    bx0, by0, bx1, by1 = b.corners
    if a.contains(b):
        return a
    if b.contains(a):
        return b
    return _box_from_corners_clipped(min(ax0, bx0), min(ay0, by0), max(ax1, bx1), max(ay1, by1))


def intersection_box(a: Box, b: Box) -> Box:
    x0, y0, x1, y1 = _intersection_corners(a, b)
    if x1 <= x0 or y1 <= y0:
        raise InvalidInputError("boxes do not overlap; intersection is empty")
    return _box_from_corners_clipped(x0, y0, x1, y1)


def relation_region(sub: Box, obj: Box, mode: RegionMode = "union", theta: float = 0.0) -> Box:
    """Ground-truth region supervising the relation box head.

    ``union`` always returns the enclosing box. ``mixture`` returns the
    intersection when the pair's IoU exceeds ``theta`` and the union otherwise.
    """
    if mode == "union":
        return union_box(sub, obj)
    if mode != "mixture":
        raise InvalidInputError(f"unknown relation-region mode {mode!r}")
    if not 0.0 <= theta < 1.0:
        raise InvalidInputError(f"theta must lie in [0, 1), got {theta}")
    if iou(sub, obj) > theta:
        return intersection_box(sub, obj)
    return union_box(sub, obj)


def _box_from_corners_clipped(x0, y0, x1, y1) -> Box:
    # Corner arithmetic can leave a center a hair outside [0, 1] or an extent a
    # hair above 1 when the inputs touch the frame border.
    cx, cy, w, h = (x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0
    return Box(min(max(cx, 0.0), 1.0), min(max(cy, 0.0), 1.0), min(w, 1.0), min(h, 1.0))


def boxes_to_array(boxes) -> np.ndarray:
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64).reshape(-1, 4)


def cxcywh_to_xyxy_np(x: np.ndarray) -> np.ndarray:
    cx, cy, w, h = np.moveaxis(x, -1, 0)
    return np.stack([cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], axis=-1)


def pairwise_iou_np(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """IoU between every row of ``a`` and every row of ``b`` (center form)."""
    a, b = cxcywh_to_xyxy_np(a), cxcywh_to_xyxy_np(b)
    lt = np.maximum(a[:, None, :2], b[None, :, :2])
    rb = np.minimum(a[:, None, 2:], b[None, :, 2:])
    wh = np.clip(rb - lt, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    return inter / (area_a[:, None] + area_b[None, :] - inter)


def cxcywh_to_xyxy_t(x: torch.Tensor) -> torch.Tensor:
    cx, cy, w, h = x.unbind(-1)
    return torch.stack([cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], dim=-1)


def giou_t(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Elementwise gIoU of aligned center-form boxes ``a[i]`` and ``b[i]``.

    Broadcasts, so ``giou_t(a[:, None], b[None])`` gives the pairwise matrix.
    """
    a, b = cxcywh_to_xyxy_t(a), cxcywh_to_xyxy_t(b)
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    lt = torch.maximum(a[..., :2], b[..., :2])
    rb = torch.minimum(a[..., 2:], b[..., 2:])
    wh = (rb - lt).clamp(min=0)
    inter = wh[..., 0] * wh[..., 1]
    union = area_a + area_b - inter
    lt_c = torch.minimum(a[..., :2], b[..., :2])
    rb_c = torch.maximum(a[..., 2:], b[..., 2:])
    wh_c = rb_c - lt_c
    enclosing = wh_c[..., 0] * wh_c[..., 1]
    return inter / union - (enclosing - union) / enclosing
