import json
import math
import random
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

import oracles
from decoupled_sgg.errors import InvalidInputError
from decoupled_sgg.geometry import Box
from decoupled_sgg.inference import TripletPrediction
from decoupled_sgg.metrics import (EvalReport, average_precision, evaluate, match_prediction,
                                   mean_average_precision, recall_at_k)
from decoupled_sgg.structures import FrameAnnotation, Triplet, TripletClass

SCENARIOS = sorted((Path(__file__).parent / "data" / "metrics").glob("*.json"))


def load_scenario(path):
    data = json.loads(Path(path).read_text())
    gts, preds = [], []
    for f, frame in enumerate(data["frames"]):
        gts.append(FrameAnnotation(tuple(
            Triplet(Box(*g["s"]), g["sl"], Box(*g["o"]), g["ol"], tuple(g["r"])) for g in frame["gts"])))
        preds.append([TripletPrediction(Box(*p["s"]), p["sl"], Box(*p["o"]), p["ol"], p["r"], p["score"], f, q)
                      for q, p in enumerate(frame["preds"])])
    seen = {TripletClass(*c) for c in data["seen"]}
    unseen = {TripletClass(*c) for c in data["unseen"]}
    return data, preds, gts, seen, unseen


def frac(s):
    return None if s is None else float(Fraction(s))


def check_scenario(path) -> list[str]:
    """Compare every expected value of a scenario file; returns a list of mismatches."""
    data, preds, gts, seen, unseen = load_scenario(path)
    exp = data["expected"]
    problems = []
    parts = {"full": None, "seen": seen, "unseen": unseen}
    for part, by_k in exp["recall"].items():
        for k, value in by_k.items():
            got = recall_at_k(preds, gts, int(k), classes=parts[part])
            if got != frac(value):  # ratios of small integers are exact in binary64
                problems.append(f"{path.name} {part} R@{k}: {got} != {value}")
    result = mean_average_precision(preds, gts, seen, unseen)
    for key, value in exp["ap"].items():
        got = result.per_class[TripletClass(*map(int, key.split(",")))]
        if abs(got - frac(value)) > 1e-12:
            problems.append(f"{path.name} AP {key}: {got} != {value}")
    for part, value in exp["map"].items():
        got = getattr(result, part)
        if value is None:
            if not math.isnan(got):
                problems.append(f"{path.name} mAP {part}: {got} != NaN")
        elif abs(got - frac(value)) > 1e-12:
            problems.append(f"{path.name} mAP {part}: {got} != {value}")
    return problems


@pytest.mark.parametrize("path", SCENARIOS, ids=lambda p: p.stem)
def test_scenario_files(path):
    assert check_scenario(path) == []


def test_scenarios_within_size_limits():
    assert len(SCENARIOS) >= 3
    for path in SCENARIOS:
        data = json.loads(path.read_text())
        assert len(data["frames"]) <= 3
        assert sum(len(f["gts"]) for f in data["frames"]) <= 4


# ---- match_prediction ----------------------------------------------------

A, B = Box(0.3, 0.3, 0.2, 0.2), Box(0.7, 0.7, 0.2, 0.2)
GT = FrameAnnotation((Triplet(A, 0, B, 1, (2,)),))


def pred(sub=A, obj=B, sl=0, ol=1, r=2, score=1.0):
    return TripletPrediction(sub, sl, obj, ol, r, score)


def test_match_identical():
    assert match_prediction(pred(), GT) == 0


def test_wrong_relation_or_label_does_not_match():
    assert match_prediction(pred(r=1), GT) is None
    assert match_prediction(pred(ol=0), GT) is None


def test_subject_iou_below_threshold():
    shifted = (0.3 + 0.2 * 3 / 7, 0.3, 0.2, 0.2)  # overlap width 0.2*4/7 -> IoU exactly 0.4
    assert float(oracles.iou(A.as_tuple(), shifted)) == pytest.approx(0.4, abs=1e-12)
    assert match_prediction(pred(sub=Box(*shifted)), GT, 0.5) is None
    assert match_prediction(pred(sub=Box(*shifted)), GT, 0.39) == 0


def test_claimed_instance_not_reused():
    claimed = set()
    assert match_prediction(pred(), GT, claimed=claimed) == 0
    assert match_prediction(pred(), GT, claimed=claimed) is None


def test_bad_threshold():
    with pytest.raises(InvalidInputError):
        match_prediction(pred(), GT, 0.0)


# ---- recall / AP ---------------------------------------------------------

def test_recall_trivial_cases():
    assert recall_at_k([[pred()]], [GT], 1) == 1.0
    assert recall_at_k([[]], [GT], 20) == 0.0
    assert math.isnan(recall_at_k([[]], [FrameAnnotation()], 20))
    with pytest.raises(InvalidInputError):
        recall_at_k([[pred()]], [GT], 0)
    with pytest.raises(InvalidInputError):
        recall_at_k([[pred()]], [GT, GT], 1)


def test_average_precision_cases():
    assert average_precision(np.array([1.0]), 1) == 1.0
    assert average_precision(np.array([0.0, 1.0]), 1) == 0.5
    assert average_precision(np.array([]), 3) == 0.0
    assert math.isnan(average_precision(np.array([1.0]), 0))
    # envelope: precision at recall 1/2 is max(1, 2/3)
    assert average_precision(np.array([1.0, 0.0, 1.0]), 2) == pytest.approx(0.5 + 0.5 * 2 / 3, abs=1e-15)


def test_map_single_correct_prediction():
    res = mean_average_precision([[pred()]], [GT], {TripletClass(0, 1, 2)}, set())
    assert res.per_class == {TripletClass(0, 1, 2): 1.0}
    assert res.full == res.seen == 1.0 and math.isnan(res.unseen)


def test_orphan_classes_excluded():
    res = mean_average_precision([[pred()]], [GT], set(), set())
    assert res.per_class == {} and math.isnan(res.full)


# ---- invariances ---------------------------------------------------------

def _random_corpus(rng, n_frames=6):
    boxes = [Box(0.25, 0.25, 0.3, 0.3), Box(0.75, 0.75, 0.3, 0.3), Box(0.3, 0.7, 0.3, 0.3), Box(0.7, 0.3, 0.3, 0.3)]
    gts, preds = [], []
    for f in range(n_frames):
        trips = tuple(Triplet(boxes[int(rng.integers(4))], 0, boxes[int(rng.integers(4))], int(rng.integers(1, 3)),
                              tuple(rng.choice(3, size=int(rng.integers(1, 3)), replace=False)))
                      for _ in range(int(rng.integers(1, 4))))
        gts.append(FrameAnnotation(trips))
        scores = rng.permutation(40)[:12] / 40 + 0.01  # distinct scores
        preds.append([TripletPrediction(boxes[int(rng.integers(4))], 0, boxes[int(rng.integers(4))],
                                        int(rng.integers(1, 3)), int(rng.integers(3)), float(s), f, q)
                      for q, s in enumerate(scores)])
    return preds, gts


def test_prediction_order_and_frame_order_invariance():
    rng = np.random.default_rng(0)
    preds, gts = _random_corpus(rng)
    seen = {TripletClass(0, 1, r) for r in range(3)}
    unseen = {TripletClass(0, 2, r) for r in range(3)}
    ref = evaluate(preds, gts, seen, unseen, ks=(3, 10)).to_json()
    order = list(range(len(gts)))
    for trial in range(5):
        random.Random(trial).shuffle(order)
        shuffled_preds = []
        for f in order:
            ps = list(preds[f])
            random.Random(trial + 100).shuffle(ps)
            shuffled_preds.append(ps)
        got = evaluate(shuffled_preds, [gts[f] for f in order], seen, unseen, ks=(3, 10)).to_json()
        assert got == ref


def test_adding_correct_prediction_never_lowers_recall():
    rng = np.random.default_rng(1)
    preds, gts = _random_corpus(rng)
    before = recall_at_k(preds, gts, 100)
    t = gts[0].triplets[0]
    extra = TripletPrediction(t.subject_box, t.subject_label, t.object_box, t.object_label, t.relations[0], 0.5)
    after = recall_at_k([preds[0] + [extra]] + preds[1:], gts, 100)
    assert after >= before


def test_removing_predictions_never_raises_map():
    rng = np.random.default_rng(2)
    preds, gts = _random_corpus(rng)
    classes = {TripletClass(0, o, r) for o in (1, 2) for r in range(3)}
    full = mean_average_precision(preds, gts, classes, set())
    fewer = mean_average_precision([p[:4] for p in preds], gts, classes, set())
    for c, ap in fewer.per_class.items():
        assert ap <= full.per_class[c] + 1e-12


def test_full_partition_is_mean_over_union():
    rng = np.random.default_rng(3)
    preds, gts = _random_corpus(rng)
    seen = {TripletClass(0, 1, r) for r in range(3)}
    unseen = {TripletClass(0, 2, r) for r in range(3)}
    res = mean_average_precision(preds, gts, seen, unseen)
    used = [ap for c, ap in res.per_class.items() if c in seen | unseen]
    assert res.full == pytest.approx(float(np.mean(used)), abs=1e-15)


def test_report_serialization():
    data, preds, gts, seen, unseen = load_scenario(SCENARIOS[-1])
    report = evaluate(preds, gts, seen, unseen, ks=(1, 3))
    body = json.loads(report.to_json())
    assert set(body) == {"recall", "map", "num_classes"}
    assert body["recall"]["full"]["3"] == 0.75
    table = report.class_table().splitlines()
    assert table[0] == "subject,object,relation,gt_count,ap,partition"
    assert len(table) == 3
    assert isinstance(report, EvalReport)
