"""Independent reference computations used to freeze expected values.

Nothing here imports the package's geometry, matching, or loss code. Box
arithmetic is exact (``fractions.Fraction`` over corner coordinates).
"""

from __future__ import annotations

import math
from fractions import Fraction


def corners(box):
    cx, cy, w, h = (Fraction(v) for v in box)
    return cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2


def area(c):
    return (c[2] - c[0]) * (c[3] - c[1])


def inter_area(a, b):
    ca, cb = corners(a), corners(b)
    w = min(ca[2], cb[2]) - max(ca[0], cb[0])
    h = min(ca[3], cb[3]) - max(ca[1], cb[1])
    return max(w, 0) * max(h, 0)


def iou(a, b):
    inter = inter_area(a, b)
    return inter / (area(corners(a)) + area(corners(b)) - inter)


def giou(a, b):
    ca, cb = corners(a), corners(b)
    inter = inter_area(a, b)
    union = area(ca) + area(cb) - inter
    enc = (max(ca[2], cb[2]) - min(ca[0], cb[0])) * (max(ca[3], cb[3]) - min(ca[1], cb[1]))
    return inter / union - (enc - union) / enc


def union_corners(a, b):
    ca, cb = corners(a), corners(b)
    return min(ca[0], cb[0]), min(ca[1], cb[1]), max(ca[2], cb[2]), max(ca[3], cb[3])


def box_cost(pred, gt):
    l1 = sum(abs(Fraction(p) - Fraction(g)) for p, g in zip(pred, gt))
    return l1 + 1 - giou(pred, gt)


def union_box_center(a, b):
    x0, y0, x1, y1 = union_corners(a, b)
    return ((x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0)


def softmax(row):
    m = max(row)
    e = [math.exp(v - m) for v in row]
    s = sum(e)
    return [v / s for v in e]


def log_softmax(row):
    m = max(row)
    lse = m + math.log(sum(math.exp(v - m) for v in row))
    return [v - lse for v in row]


def sigmoid(x):
    return 1 / (1 + math.exp(-x))


def bce_logit(x, y):
    return -(y * math.log(sigmoid(x)) + (1 - y) * math.log(1 - sigmoid(x)))


def loss_terms(pred, gt_triplets, pairs, coeffs, no_object_weight=0.1, subject_fixed=False,
               region=union_box_center):
    """Loss of one frame from plain Python lists.

    ``pred`` maps 'sub_boxes', 'obj_boxes', 'rel_boxes', 'sub_logits',
    'obj_logits', 'rel_logits' to nested lists. ``gt_triplets`` holds
    ``(sub_box, sub_label, obj_box, obj_label, relations)``. ``pairs`` is a
    list of ``(pred index, gt index)``.
    """
    n_q = len(pred["obj_logits"])
    n_cls = len(pred["obj_logits"][0])
    n_rel = len(pred["rel_logits"][0])
    norm = max(len(gt_triplets), 1)
    l1 = gi = 0.0
    for p, g in pairs:
        sb, sl, ob, ol, rels = gt_triplets[g]
        kinds = [(pred["obj_boxes"][p], ob)]
        if not subject_fixed:
            kinds.append((pred["sub_boxes"][p], sb))
        if pred.get("rel_boxes") is not None:
            kinds.append((pred["rel_boxes"][p], tuple(float(v) for v in region(sb, ob))))
        for pb, gb in kinds:
            l1 += sum(abs(a - b) for a, b in zip(pb, gb)) / norm
            gi += (1 - float(giou(pb, gb))) / norm
    matched = dict(pairs)

    def ce(key, label_of):
        num = den = 0.0
        for q in range(n_q):
            target = label_of(gt_triplets[matched[q]]) if q in matched else n_cls - 1
            w = no_object_weight if target == n_cls - 1 else 1.0
            num += -w * log_softmax(pred[key][q])[target]
            den += w
        return num / den

    l_obj = ce("obj_logits", lambda t: t[3])
    if not subject_fixed:
        l_obj += ce("sub_logits", lambda t: t[1])
    l_rel = 0.0
    for q in range(n_q):
        rels = gt_triplets[matched[q]][4] if q in matched else ()
        for r in range(n_rel):
            l_rel += bce_logit(pred["rel_logits"][q][r], 1.0 if r in rels else 0.0)
    l_rel /= norm
    lg, ll, lo, lr = coeffs
    return {"l_giou": gi, "l_l1": l1, "l_obj": l_obj, "l_rel": l_rel,
            "total": lg * gi + ll * l1 + lo * l_obj + lr * l_rel}
