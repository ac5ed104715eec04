"""Dual-branch RoI labelling, ignore-region exclusion and minibatch sampling.

Body and s-head labels are decided independently: the body label compares the
RoI with ground-truth full boxes, the head label compares the s-head cut of the
RoI with the s-head cut of each ground truth. The two can disagree for the same
RoI, which is the point of training the branches separately.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .geometry import S_HEAD, Box, area, boxes_to_array, cut_array, cut_part, pairwise_ioa, pairwise_iou
from .losses import EXCLUDED, NEGATIVE, POSITIVE, Label, RegressionTarget, encode_deltas

CONTAINMENT_SLACK = 1e-6
# visible-ratio threshold used when that filter is switched on without a value
VISIBLE_RATIO_DEFAULT = 0.3


@dataclass(frozen=True)
class GroundTruth:
    full: Box
    visible: Optional[Box] = None
    ignore: bool = False
    id: int = 0

    def __post_init__(self):
        v, f = self.visible, self.full
        if v is not None:
            s = CONTAINMENT_SLACK
            if v.x1 < f.x1 - s or v.y1 < f.y1 - s or v.x2 > f.x2 + s or v.y2 > f.y2 + s:
                raise ValueError(f"visible box {v.as_tuple()} exceeds full box {f.as_tuple()} (gt id {self.id})")

    @property
    def visible_ratio(self) -> float:
        if self.visible is None:
            return 1.0
        return min(1.0, area(self.visible) / area(self.full))


@dataclass(frozen=True)
class AssignConfig:
    pos_iou: float = 0.5
    neg_iou_hi: float = 0.5
    neg_iou_lo: float = 0.0
    ignore_ioa: float = 0.5
    visible_ratio_min: Optional[float] = None
    force_best_match: bool = False

    def __post_init__(self):
        if not 0 <= self.neg_iou_lo < self.neg_iou_hi <= self.pos_iou <= 1:
            raise ValueError("thresholds must satisfy 0 <= neg_iou_lo < neg_iou_hi <= pos_iou <= 1")
        if not 0 <= self.ignore_ioa <= 1:
            raise ValueError("ignore_ioa must lie in [0, 1]")
        if self.visible_ratio_min is not None and not 0 <= self.visible_ratio_min <= 1:
            raise ValueError("visible_ratio_min must lie in [0, 1]")


@dataclass(frozen=True)
class RoiLabels:
    body_label: Label
    head_label: Label
    matched_gt_body: Optional[int] = None
    matched_gt_head: Optional[int] = None
    body_target: Optional[RegressionTarget] = None
    head_target: Optional[RegressionTarget] = None
    body_iou: float = 0.0
    head_iou: float = 0.0


def _label_branch(overlaps: np.ndarray, ids: np.ndarray, cfg: AssignConfig):
    """Per-RoI (label, matched column, max IoU) from an ``(R, G)`` overlap matrix."""
    n_roi = overlaps.shape[0]
    if overlaps.shape[1] == 0:
        labels = np.full(n_roi, int(NEGATIVE) if cfg.neg_iou_lo <= 0 else int(EXCLUDED))
        return labels, np.full(n_roi, -1), np.zeros(n_roi)
    # lowest id wins ties: order columns by id and take the first argmax
    order = np.argsort(ids, kind="stable")
    best_in_order = np.argmax(overlaps[:, order], axis=1)
    best = order[best_in_order]
    max_iou = overlaps[np.arange(n_roi), best]
    labels = np.full(n_roi, int(EXCLUDED))
    labels[(max_iou >= cfg.neg_iou_lo) & (max_iou < cfg.neg_iou_hi)] = int(NEGATIVE)
    labels[max_iou >= cfg.pos_iou] = int(POSITIVE)
    if cfg.force_best_match:
        for col in order:
            col_best = overlaps[:, col].max()
            if col_best <= 0:
                continue
            for r in np.flatnonzero(overlaps[:, col] == col_best):
                if labels[r] != POSITIVE:
                    labels[r] = int(POSITIVE)
                    best[r] = col
                    max_iou[r] = col_best
    return labels, best, max_iou


def assign_labels(rois: Sequence[Box], gts: Sequence[GroundTruth], cfg: AssignConfig = AssignConfig()) -> list[RoiLabels]:
    """Label every RoI for the body and s-head branches independently.

    Ignore ground truths take no part in matching; use :func:`ignore_filter`
    (or :func:`label_rois`) to exclude RoIs that fall into them.
    """
    active = [g for g in gts if not g.ignore]
    roi_arr = boxes_to_array(rois)
    gt_arr = boxes_to_array([g.full for g in active])
    ids = np.array([g.id for g in active], dtype=np.int64)

    body_lab, body_best, body_iou = _label_branch(pairwise_iou(roi_arr, gt_arr), ids, cfg)
    head_lab, head_best, head_iou = _label_branch(
        pairwise_iou(cut_array(roi_arr), cut_array(gt_arr)), ids, cfg
    )

    out = []
    for i, roi in enumerate(rois):
        kw = {}
        if body_lab[i] == POSITIVE:
            gt = active[body_best[i]]
            kw["matched_gt_body"] = gt.id
            kw["body_target"] = encode_deltas(gt.full, roi)
        if head_lab[i] == POSITIVE:
            gt = active[head_best[i]]
            kw["matched_gt_head"] = gt.id
            kw["head_target"] = encode_deltas(cut_part(gt.full, S_HEAD), cut_part(roi, S_HEAD))
        out.append(RoiLabels(
            Label(int(body_lab[i])), Label(int(head_lab[i])),
            body_iou=float(body_iou[i]), head_iou=float(head_iou[i]), **kw,
        ))
    return out


def ignore_filter(rois: Sequence[Box], ignore_regions: Sequence[Box], ignore_ioa: float = 0.5) -> list[tuple[Box, bool]]:
    """Pair each RoI with whether it falls into an ignore region.

    A RoI is excluded when more than ``ignore_ioa`` of its area lies inside a
    single ignore region (strict inequality).
    """
    if not ignore_regions or not rois:
        return [(r, False) for r in rois]
    ioa = pairwise_ioa(boxes_to_array(rois), boxes_to_array(ignore_regions)).max(axis=1)
    return [(r, bool(v > ignore_ioa)) for r, v in zip(rois, ioa)]


def visible_ratio_filter(labels: Sequence[RoiLabels], gts: Sequence[GroundTruth], min_ratio: float) -> list[RoiLabels]:
    """Demote body positives whose matched ground truth is too occluded."""
    if not 0 <= min_ratio <= 1:
        raise ValueError("min_ratio must lie in [0, 1]")
    by_id = {g.id: g for g in gts}
    out = []
    for lab in labels:
        if lab.body_label == POSITIVE and lab.matched_gt_body is not None:
            gt = by_id.get(lab.matched_gt_body)
            if gt is not None and gt.visible is not None and gt.visible_ratio < min_ratio:
                lab = replace(lab, body_label=EXCLUDED, matched_gt_body=None, body_target=None)
        out.append(lab)
    return out


def exclude(lab: RoiLabels) -> RoiLabels:
    return RoiLabels(EXCLUDED, EXCLUDED, body_iou=lab.body_iou, head_iou=lab.head_iou)


def label_rois(rois: Sequence[Box], gts: Sequence[GroundTruth], cfg: AssignConfig = AssignConfig()) -> list[RoiLabels]:
    """Full labelling pipeline: assignment, ignore exclusion, then the optional visible-ratio filter."""
    labels = assign_labels(rois, gts, cfg)
    regions = [g.full for g in gts if g.ignore]
    flags = ignore_filter(rois, regions, cfg.ignore_ioa)
    labels = [exclude(lab) if excluded else lab for lab, (_, excluded) in zip(labels, flags)]
    if cfg.visible_ratio_min is not None:
        labels = visible_ratio_filter(labels, gts, cfg.visible_ratio_min)
    return labels


def sample_minibatch(labels: Sequence[RoiLabels], batch_size: int, pos_fraction: float = 0.25, seed: int = 0) -> list[int]:
    """Seeded positive/negative sampling of RoI indices.

    A RoI counts as positive when either branch labels it positive and is
    sampleable unless both branches exclude it. At most
    ``floor(pos_fraction * batch_size)`` positives are drawn; negatives fill
    the rest of the batch as far as available. Returned indices are sorted.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if not 0 <= pos_fraction <= 1:
        raise ValueError("pos_fraction must lie in [0, 1]")
    pos = [i for i, l in enumerate(labels) if POSITIVE in (l.body_label, l.head_label)]
    neg = [
        i for i, l in enumerate(labels)
        if POSITIVE not in (l.body_label, l.head_label) and NEGATIVE in (l.body_label, l.head_label)
    ]
    if not pos and not neg:
        raise ValueError("no sampleable RoIs: every RoI is excluded")
    rng = np.random.default_rng(seed)
    n_pos = min(len(pos), int(np.floor(pos_fraction * batch_size)))
    n_neg = min(len(neg), batch_size - n_pos)
    picked = []
    if n_pos:
        picked.extend(rng.choice(pos, size=n_pos, replace=False).tolist())
    if n_neg:
        picked.extend(rng.choice(neg, size=n_neg, replace=False).tolist())
    return sorted(int(i) for i in picked)
