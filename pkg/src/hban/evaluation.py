"""Pedestrian evaluation: subsets, greedy matching, FPPI / miss-rate curves, MR-2 and AR.

Ground truths outside the evaluated subset are not discarded: they behave like
ignore regions, so a detection that lands on one is neither a true nor a false
positive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np

from .assignment import GroundTruth
from .fusion import Detection
from .geometry import area, boxes_to_array, pairwise_ioa, pairwise_iou

MR_FLOOR = 1e-6


def default_fppi_refs() -> tuple[float, ...]:
    return tuple(10.0 ** (-2 + k / 4) for k in range(9))


@dataclass(frozen=True)
class SubsetSpec:
    name: str
    min_height: float = 50.0
    occ_lo: float = 0.0
    occ_hi: float = 1.0
    max_height: float = math.inf

    def __post_init__(self):
        for name in ("min_height", "occ_lo", "occ_hi", "max_height"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.min_height < 0:
            raise ValueError("min_height must be >= 0")
        if not 0 <= self.occ_lo <= self.occ_hi:
            raise ValueError("need 0 <= occ_lo <= occ_hi")


# occlusion intervals are half-open [occ_lo, occ_hi)
REASONABLE = SubsetSpec("reasonable", 50.0, 0.0, 0.35)
HEAVY = SubsetSpec("heavy", 50.0, 0.35, 0.8)
ALL = SubsetSpec("all", 0.0, 0.0, math.inf)
SUBSETS = {s.name: s for s in (REASONABLE, HEAVY, ALL)}


@dataclass(frozen=True)
class EvalConfig:
    iou_thresh: float = 0.5
    fppi_refs: tuple = field(default_factory=default_fppi_refs)
    subset: SubsetSpec = REASONABLE

    def __post_init__(self):
        refs = tuple(float(r) for r in self.fppi_refs)
        object.__setattr__(self, "fppi_refs", refs)
        if not refs or any(b <= a for a, b in zip(refs, refs[1:])):
            raise ValueError("fppi_refs must be strictly increasing")
        if refs[0] < 1e-2 - 1e-15 or refs[-1] > 1.0 + 1e-15:
            raise ValueError("fppi_refs must lie within [1e-2, 1]")
        if not 0 < self.iou_thresh <= 1:
            raise ValueError("iou_thresh must lie in (0, 1]")


class GtStatus(Enum):
    EVALUATE = "evaluate"
    IGNORE = "treat-as-ignore"


@dataclass
class MatchResult:
    """Per-image matching outcome; detection lists follow the input order."""

    scores: np.ndarray
    det_status: list  # "tp" | "fp" | "ignored"
    gt_matched: list  # per evaluated-or-ignored GT: det index or None
    gt_status: list
    num_gt: int

    @property
    def num_tp(self) -> int:
        return self.det_status.count("tp")

    @property
    def num_fp(self) -> int:
        return self.det_status.count("fp")

    @property
    def num_ignored(self) -> int:
        return self.det_status.count("ignored")

    @property
    def num_missed(self) -> int:
        return sum(1 for m, s in zip(self.gt_matched, self.gt_status) if s is GtStatus.EVALUATE and m is None)


@dataclass
class FppiCurve:
    fppi: np.ndarray
    miss_rate: np.ndarray
    num_gt: int
    num_images: int

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fppi.tolist(), self.miss_rate.tolist()))


def occlusion_ratio(gt: GroundTruth) -> float:
    """``1 - visible / full`` area; a ground truth without a visible box counts as unoccluded."""
    if gt.visible is None:
        return 0.0
    return min(1.0, max(0.0, 1.0 - area(gt.visible) / area(gt.full)))


def subset_filter(gts: Sequence[GroundTruth], spec: SubsetSpec) -> list[GtStatus]:
    out = []
    for g in gts:
        occ = occlusion_ratio(g)
        h = g.full.height
        ok = (
            not g.ignore
            and spec.min_height <= h < spec.max_height
            and spec.occ_lo <= occ < spec.occ_hi
        )
        out.append(GtStatus.EVALUATE if ok else GtStatus.IGNORE)
    return out


def _det_order(scores: Sequence[float]) -> list[int]:
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    status: Sequence[GtStatus],
    iou_thresh: float = 0.5,
) -> MatchResult:
    """Greedy matching for one image.

    Detections are visited by descending score (input order on ties). Each one
    takes the unmatched evaluated ground truth with the highest IoU, if that IoU
    reaches ``iou_thresh``; otherwise, if it covers an ignored ground truth with
    intersection-over-detection-area at least ``iou_thresh``, it is ignored;
    otherwise it is a false positive.
    """
    scores = np.array([d.score for d in dets], dtype=np.float64)
    det_arr = boxes_to_array([d.box for d in dets])
    gt_arr = boxes_to_array([g.full for g in gts])
    ev = np.array([s is GtStatus.EVALUATE for s in status], dtype=bool)
    ious = pairwise_iou(det_arr, gt_arr)
    ioas = pairwise_ioa(det_arr, gt_arr)
    det_status = [""] * len(dets)
    gt_matched: list = [None] * len(gts)
    taken = np.zeros(len(gts), dtype=bool)
    for i in _det_order(scores.tolist()):
        cand = ev & ~taken
        if cand.any():
            row = np.where(cand, ious[i], -1.0)
            j = int(np.argmax(row))
            if row[j] >= iou_thresh:
                taken[j] = True
                gt_matched[j] = i
                det_status[i] = "tp"
                continue
        if (~ev).any() and (ioas[i][~ev] >= iou_thresh).any():
            det_status[i] = "ignored"
        else:
            det_status[i] = "fp"
    return MatchResult(scores, det_status, gt_matched, list(status), int(ev.sum()))


def _collapse(fppi: np.ndarray, mr: np.ndarray):
    """Keep, for each distinct FPPI, the lowest miss rate reached at it."""
    keep = np.ones(fppi.size, dtype=bool)
    keep[:-1] = fppi[1:] != fppi[:-1]
    return fppi[keep], mr[keep]


def fppi_miss_curve(results: Sequence[MatchResult], num_images: Optional[int] = None) -> FppiCurve:
    """FPPI and miss rate at every distinct detection-score threshold.

    Points are ordered by decreasing threshold, hence non-decreasing FPPI;
    thresholds that leave the FPPI unchanged are merged into one point. With no
    scored detections the curve is the single point ``(0, 1)``.
    """
    num_images = len(results) if num_images is None else num_images
    if num_images < 1:
        raise ValueError("need at least one image")
    num_gt = sum(r.num_gt for r in results)
    if num_gt == 0:
        raise ValueError("no evaluated ground truth")
    scores, tp, fp = [], [], []
    for r in results:
        # ignored detections still define a threshold, they just add no TP or FP
        for s, st in zip(r.scores.tolist(), r.det_status):
            scores.append(s)
            tp.append(st == "tp")
            fp.append(st == "fp")
    if not scores:
        return FppiCurve(np.array([0.0]), np.array([1.0]), num_gt, num_images)
    scores = np.array(scores)
    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    ctp = np.cumsum(np.array(tp)[order])
    cfp = np.cumsum(np.array(fp)[order])
    # one point per distinct threshold: the last index of every run of equal scores
    last = np.ones(scores.size, dtype=bool)
    last[:-1] = scores[1:] != scores[:-1]
    fppi = cfp[last] / num_images
    mr = 1.0 - ctp[last] / num_gt
    fppi, mr = _collapse(fppi, mr)
    return FppiCurve(fppi, mr, num_gt, num_images)


def sample_miss_rates(curve: FppiCurve, refs: Sequence[float]) -> list[float]:
    out = []
    for r in refs:
        idx = np.flatnonzero(curve.fppi <= r)
        out.append(float(curve.miss_rate[idx[-1]]) if idx.size else 1.0)
    return out


def log_average_miss_rate(curve: FppiCurve, refs: Sequence[float] = default_fppi_refs()) -> float:
    """Geometric mean of the miss rates sampled at ``refs``, floored at 1e-6."""
    mrs = [max(m, MR_FLOOR) for m in sample_miss_rates(curve, refs)]
    if len(set(mrs)) == 1:
        return mrs[0]  # exact, where exp(log(x)) may be off by an ulp
    logs = [math.log(m) for m in mrs]
    # fsum: correctly rounded, independent of summation order
    return math.exp(math.fsum(logs) / len(logs))


def evaluate(
    dets_by_image: Mapping[int, Sequence[Detection]],
    gts_by_image: Mapping[int, Sequence[GroundTruth]],
    cfg: EvalConfig = EvalConfig(),
) -> tuple[float, FppiCurve, list[MatchResult]]:
    """Match, build the curve and compute MR-2 over every image in ``gts_by_image``."""
    results = []
    for image_id in sorted(gts_by_image):
        gts = list(gts_by_image[image_id])
        status = subset_filter(gts, cfg.subset)
        results.append(match_detections(list(dets_by_image.get(image_id, ())), gts, status, cfg.iou_thresh))
    curve = fppi_miss_curve(results, len(results))
    return log_average_miss_rate(curve, cfg.fppi_refs), curve, results


def average_recall_curve(
    proposals_by_image: Mapping[int, Sequence[Detection]],
    gts_by_image: Mapping[int, Sequence[GroundTruth]],
    budgets: Sequence[int],
    iou_thresh: float = 0.5,
) -> list[tuple[int, float]]:
    """Recall of the top-``k`` proposals per image, for each budget ``k``.

    All non-ignore ground truths count, regardless of height or occlusion. A
    ground truth is recalled when some proposal among the top ``k`` overlaps it
    with IoU at least ``iou_thresh``.
    """
    total = 0
    # per image: for each GT, the best rank at which it is first covered
    first_hit = []
    for image_id in sorted(gts_by_image):
        gts = [g for g in gts_by_image[image_id] if not g.ignore]
        total += len(gts)
        if not gts:
            continue
        props = list(proposals_by_image.get(image_id, ()))
        order = _det_order([p.score for p in props])
        if not props:
            first_hit.extend([math.inf] * len(gts))
            continue
        ious = pairwise_iou(boxes_to_array([props[i].box for i in order]), boxes_to_array([g.full for g in gts]))
        hit = ious >= iou_thresh
        for j in range(len(gts)):
            rows = np.flatnonzero(hit[:, j])
            first_hit.append(int(rows[0]) + 1 if rows.size else math.inf)
    if total == 0:
        raise ValueError("no ground truth to recall")
    first_hit = np.array(first_hit, dtype=np.float64)
    return [(int(k), float(np.count_nonzero(first_hit <= k)) / total) for k in budgets]
