from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hban.assignment import (
    AssignConfig,
    GroundTruth,
    assign_labels,
    exclude,
    ignore_filter,
    label_rois,
    sample_minibatch,
    visible_ratio_filter,
)
from hban.geometry import Box, cut_part
from hban.losses import EXCLUDED, NEGATIVE, POSITIVE, decode_deltas


def frac_iou(a, b):
    """Exact IoU on rational corners, written independently of the library."""
    a = [Fraction(v) for v in a]
    b = [Fraction(v) for v in b]
    iw = max(Fraction(0), min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(Fraction(0), min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def frac_head(b):
    x1, y1, x2, y2 = (Fraction(v) for v in b)
    w, h = x2 - x1, y2 - y1
    return (x1 + w / 6, y1, x1 + 5 * w / 6, y1 + h / 3)


def test_label_conflict_example():
    gt_box, roi_box = (0, 0, 41, 100), (0, 20, 41, 120)
    assert frac_iou(gt_box, roi_box) == Fraction(2, 3)
    assert frac_iou(frac_head(gt_box), frac_head(roi_box)) == Fraction(1, 4)

    (lab,) = assign_labels([Box(*roi_box)], [GroundTruth(Box(*gt_box))], AssignConfig(pos_iou=0.5))
    assert lab.body_label == POSITIVE
    assert lab.head_label == NEGATIVE
    assert lab.body_iou == pytest.approx(2 / 3, abs=1e-12)
    assert lab.head_iou == pytest.approx(0.25, abs=1e-12)
    assert lab.matched_gt_body == 0 and lab.matched_gt_head is None


def test_targets_decode_to_matched_gt():
    gt = GroundTruth(Box(10, 10, 51, 110), id=7)
    roi = Box(12, 14, 50, 112)
    (lab,) = assign_labels([roi], [gt])
    assert lab.body_label == POSITIVE and lab.head_label == POSITIVE
    assert lab.matched_gt_body == lab.matched_gt_head == 7
    assert np.allclose(decode_deltas(lab.body_target, roi).as_tuple(), gt.full.as_tuple())
    head = decode_deltas(lab.head_target, cut_part(roi))
    assert np.allclose(head.as_tuple(), cut_part(gt.full).as_tuple())


def test_ties_go_to_lowest_id():
    box = Box(0, 0, 40, 100)
    gts = [GroundTruth(box, id=5), GroundTruth(box, id=2)]
    (lab,) = assign_labels([box], gts)
    assert lab.matched_gt_body == 2 and lab.matched_gt_head == 2


def test_no_ground_truth_means_negative():
    labs = assign_labels([Box(0, 0, 10, 20)], [])
    assert labs[0].body_label == NEGATIVE and labs[0].head_label == NEGATIVE


def test_band_between_thresholds_is_excluded():
    cfg = AssignConfig(pos_iou=0.7, neg_iou_hi=0.3)
    (lab,) = assign_labels([Box(0, 20, 41, 120)], [GroundTruth(Box(0, 0, 41, 100))], cfg)
    assert lab.body_label == EXCLUDED  # IoU 2/3 falls in [0.3, 0.7)
    assert lab.head_label == NEGATIVE


def test_force_best_match_promotes():
    cfg = AssignConfig(pos_iou=0.9, neg_iou_hi=0.5, force_best_match=True)
    (lab,) = assign_labels([Box(0, 20, 41, 120)], [GroundTruth(Box(0, 0, 41, 100))], cfg)
    assert lab.body_label == POSITIVE and lab.head_label == POSITIVE


def test_ignore_filter_strict():
    region = Box(0, 0, 10, 10)
    half = Box(5, 0, 15, 10)   # exactly half inside
    more = Box(4, 0, 14, 10)
    flags = ignore_filter([half, more], [region], 0.5)
    assert [f for _, f in flags] == [False, True]


def test_label_rois_excludes_ignored_and_skips_ignore_gt():
    gts = [GroundTruth(Box(0, 0, 40, 100)), GroundTruth(Box(100, 0, 200, 100), ignore=True, id=1)]
    labs = label_rois([Box(0, 0, 40, 100), Box(110, 10, 150, 90)], gts)
    assert labs[0].body_label == POSITIVE
    assert labs[1].body_label == EXCLUDED and labs[1].head_label == EXCLUDED


def test_visible_ratio_filter_demotes_body_only():
    gt = GroundTruth(Box(0, 0, 40, 100), visible=Box(0, 0, 40, 20))
    labs = label_rois([Box(0, 0, 40, 100)], [gt], AssignConfig(visible_ratio_min=0.3))
    assert labs[0].body_label == EXCLUDED
    assert labs[0].head_label == POSITIVE
    kept = visible_ratio_filter(assign_labels([Box(0, 0, 40, 100)], [gt]), [gt], 0.1)
    assert kept[0].body_label == POSITIVE


def test_visible_must_lie_inside_full():
    with pytest.raises(ValueError):
        GroundTruth(Box(0, 0, 10, 10), visible=Box(5, 5, 20, 20))


def test_config_validation():
    with pytest.raises(ValueError):
        AssignConfig(pos_iou=0.4, neg_iou_hi=0.5)


small = st.floats(0, 200, allow_nan=False)
dim = st.floats(5, 100, allow_nan=False)


@st.composite
def scene(draw):
    def box():
        x, y, w, h = draw(small), draw(small), draw(dim), draw(dim)
        return Box(x, y, x + w, y + h)
    gts = [GroundTruth(box(), id=i) for i in range(draw(st.integers(1, 4)))]
    rois = [box() for _ in range(draw(st.integers(1, 8)))]
    return gts, rois


@given(scene(), st.floats(-50, 50), st.floats(-50, 50), st.floats(0.5, 4))
@settings(max_examples=60)
def test_labels_equivariant_under_similarity(data, dx, dy, s):
    gts, rois = data

    def move(b):
        return b.translate(dx, dy).scale(s)

    a = assign_labels(rois, gts)
    b = assign_labels([move(r) for r in rois], [GroundTruth(move(g.full), id=g.id) for g in gts])
    for la, lb in zip(a, b):
        assert la.body_iou == pytest.approx(lb.body_iou, abs=1e-9)
        assert la.head_iou == pytest.approx(lb.head_iou, abs=1e-9)
        # labels can only flip when an IoU sits at a threshold to rounding precision
        if abs(la.body_iou - 0.5) > 1e-9:
            assert la.body_label == lb.body_label
        if abs(la.head_iou - 0.5) > 1e-9:
            assert la.head_label == lb.head_label


@given(scene(), st.floats(0.1, 0.9), st.floats(0.1, 0.9))
@settings(max_examples=60)
def test_positives_shrink_as_threshold_rises(data, t1, t2):
    gts, rois = data
    lo, hi = sorted((t1, t2))
    pos_lo = [l.body_label == POSITIVE for l in assign_labels(rois, gts, AssignConfig(pos_iou=lo, neg_iou_hi=lo))]
    pos_hi = [l.body_label == POSITIVE for l in assign_labels(rois, gts, AssignConfig(pos_iou=hi, neg_iou_hi=lo))]
    assert all(a or not b for a, b in zip(pos_lo, pos_hi))


def _labels(n_pos, n_neg, n_exc):
    gt = GroundTruth(Box(0, 0, 40, 100))
    rois = [Box(0, 0, 40, 100)] * n_pos + [Box(500, 500, 540, 600)] * n_neg
    labs = assign_labels(rois, [gt])
    return labs + [exclude(labs[0])] * n_exc


def test_minibatch_respects_fraction_and_seed():
    labs = _labels(20, 100, 10)
    a = sample_minibatch(labs, 32, 0.25, seed=3)
    assert a == sample_minibatch(labs, 32, 0.25, seed=3)
    assert len(a) == 32 and a == sorted(a)
    assert sum(i < 20 for i in a) == 8
    assert all(i < 120 for i in a)  # excluded RoIs never drawn


def test_minibatch_fills_from_what_exists():
    labs = _labels(2, 3, 0)
    assert sample_minibatch(labs, 64, 0.5, seed=0) == [0, 1, 2, 3, 4]


def test_minibatch_all_excluded_raises():
    with pytest.raises(ValueError):
        sample_minibatch(_labels(1, 0, 3)[1:], 8)
