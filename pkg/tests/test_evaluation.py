import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csfusion.evaluation import UNDEFINED, evaluate, format_machine, format_report, parse_report
from csfusion.scene import ClassTable

AB = ClassTable(("A", "B"))
IGN = AB.ignore_id


def toy():
    # A: 4 GT points, 2 right, 2 left unlabeled; B: 3 GT points, all right
    gt = np.array([0, 0, 0, 0, 1, 1, 1])
    pred = np.array([0, 0, IGN, IGN, 1, 1, 1])
    return pred, gt


def test_toy_fixture_penalize():
    r = evaluate(*toy(), AB, "penalize")
    assert r.per_class_iou.tolist() == [0.5, 1.0] and r.miou == 0.75
    assert r.coverage == 5 / 7 and r.scored_points == 7


def test_toy_fixture_exclude():
    r = evaluate(*toy(), AB, "exclude")
    assert r.per_class_iou.tolist() == [1.0, 1.0] and r.scored_points == 5


def test_perfect_and_disjoint(ct):
    gt = np.array([0, 1, 2, 2, 5])
    r = evaluate(gt, gt, ct)
    assert r.miou == 1.0 and np.isnan(r.per_class_iou[3])
    r = evaluate(np.array([1, 1]), np.array([0, 0]), AB)
    assert r.per_class_iou[0] == 0.0 and math.isnan(r.per_class_iou[1])


def test_gt_ignore_never_scored():
    r = evaluate(np.array([0, 1, 1]), np.array([0, IGN, IGN]), AB)
    assert r.scored_points == 1 and r.miou == 1.0


def test_errors():
    with pytest.raises(ValueError, match="length mismatch"):
        evaluate(np.array([0]), np.array([0, 1]), AB)
    with pytest.raises(ValueError):
        evaluate(np.array([0]), np.array([0]), AB, "lenient")


def _set_iou(pred, gt, c, policy, ign):
    keep = [i for i in range(len(gt)) if gt[i] != ign and (policy == "penalize" or pred[i] != ign)]
    P = {i for i in keep if pred[i] == c}
    G = {i for i in keep if gt[i] == c}
    if not G:
        return None
    return len(P & G) / len(P | G)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 400))
def test_iou_matches_set_arithmetic(seed, n):
    ct = ClassTable(tuple("abcde"))
    rng = np.random.default_rng(seed)
    gt = rng.integers(0, ct.m + 1, n)
    pred = rng.integers(0, ct.m + 1, n)
    for policy in ("penalize", "exclude"):
        r = evaluate(pred, gt, ct, policy)
        assert r.confusion.sum() == r.scored_points
        for c in range(ct.m):
            ref = _set_iou(pred, gt, c, policy, ct.ignore_id)
            if ref is None:
                assert math.isnan(r.per_class_iou[c])
            else:
                assert abs(r.per_class_iou[c] - ref) <= 1e-12
    pen, exc = evaluate(pred, gt, ct, "penalize"), evaluate(pred, gt, ct, "exclude")
    if not math.isnan(exc.miou) and not math.isnan(pen.miou):
        assert pen.miou <= exc.miou + 1e-12


def test_report_cells(ct):
    r = evaluate(np.array([0, 1]), np.array([0, 1]), ct)
    text = format_report(r, ct)
    parsed = parse_report(text)
    assert parsed["wall"] == 100.0 and parsed["floor"] == 100.0 and parsed["avg"] == 100.0
    assert parsed["desk"] is None and UNDEFINED in text
    assert list(parsed) == list(ct.names) + ["avg"]


def test_report_round_trip():
    rng = np.random.default_rng(1)
    ct = ClassTable(("chair", "table", "x"))
    gt, pred = rng.integers(0, 3, 500), rng.integers(0, 4, 500)
    r = evaluate(pred, gt, ct)
    parsed = parse_report(format_report(r, ct))
    for name, x in zip(ct.names, r.per_class_iou):
        assert parsed[name] == round(100 * x, 1)
    assert parsed["avg"] == round(100 * r.miou, 1)


def test_machine_format():
    r = evaluate(*toy(), AB)
    lines = format_machine(r, AB).splitlines()
    assert lines == ["A=0.5", "B=1.0", "miou=0.75", f"coverage={5 / 7!r}"]
