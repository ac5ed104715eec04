"""Merging body and s-head detections into one ranked, de-duplicated list."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .geometry import S_HEAD, Box, PartSpec, expand_part

BRANCHES = ("body", "s-head")


@dataclass(frozen=True)
class Detection:
    image_id: int
    box: Box
    score: float
    branch: str = "body"

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score must lie in [0, 1], got {self.score}")
        if self.branch not in BRANCHES:
            raise ValueError(f"unknown branch {self.branch!r}")


@dataclass(frozen=True)
class FusionConfig:
    nms_iou: float = 0.5
    per_branch_prenms: bool = True
    max_keep: int = 300

    def __post_init__(self):
        if not 0 < self.nms_iou < 1:
            raise ValueError("nms_iou must lie in (0, 1)")
        if int(self.max_keep) != self.max_keep or self.max_keep < 1:
            raise ValueError("max_keep must be a positive integer")


def expand_head_detections(dets: Sequence[Detection], spec: PartSpec = S_HEAD) -> list[Detection]:
    """Map s-head detections to the body boxes they imply. Scores and tags are kept."""
    out = []
    for d in dets:
        if d.branch != "s-head":
            raise ValueError("expand_head_detections expects s-head detections only")
        out.append(replace(d, box=expand_part(d.box, spec)))
    return out


def _rank(dets: Sequence[Detection]) -> list[int]:
    return sorted(range(len(dets)), key=lambda i: (-dets[i].score, dets[i].box.x1, dets[i].box.y1, i))


def greedy_nms(dets: Sequence[Detection], iou_thresh: float) -> list[Detection]:
    """Greedy non-maximum suppression on one image's detections.

    Boxes are visited by descending score (equal scores by ascending x1, then
    y1); a box is dropped when its IoU with an already kept box exceeds
    ``iou_thresh``. The survivors are returned in visiting order.
    """
    if not dets:
        return []
    order = _rank(dets)
    boxes = np.array([dets[i].box.as_tuple() for i in order], dtype=np.float64)
    x1, y1, x2, y2 = boxes.T
    areas = (x2 - x1) * (y2 - y1)
    alive = np.ones(len(order), dtype=bool)
    keep = []
    for k in range(len(order)):
        if not alive[k]:
            continue
        keep.append(order[k])
        rest = np.flatnonzero(alive[k + 1:]) + k + 1
        if rest.size == 0:
            break
        iw = np.minimum(x2[k], x2[rest]) - np.maximum(x1[k], x1[rest])
        ih = np.minimum(y2[k], y2[rest]) - np.maximum(y1[k], y1[rest])
        inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
        ovr = inter / (areas[k] + areas[rest] - inter)
        # identical boxes overlap fully regardless of rounding in the union
        ovr[np.all(boxes[rest] == boxes[k], axis=1)] = 1.0
        alive[rest[ovr > iou_thresh]] = False
    return [dets[i] for i in keep]


def pipeline_fuse(body_dets: Sequence[Detection], head_dets: Sequence[Detection], cfg: FusionConfig = FusionConfig()) -> list[Detection]:
    """Fuse one image's body and s-head detections.

    Optionally de-duplicates each branch on its own first, then expands the
    head detections to body boxes, merges both lists by score, runs a final
    NMS and keeps the ``cfg.max_keep`` best.
    """
    body = list(body_dets)
    head = list(head_dets)
    if cfg.per_branch_prenms:
        body = greedy_nms(body, cfg.nms_iou)
        head = greedy_nms(head, cfg.nms_iou)
    merged = body + expand_head_detections(head)
    return greedy_nms(merged, cfg.nms_iou)[: cfg.max_keep]


def head_only(head_dets: Sequence[Detection], cfg: FusionConfig = FusionConfig()) -> list[Detection]:
    """Single-part detector output: NMS on the part boxes, then expansion."""
    return expand_head_detections(greedy_nms(list(head_dets), cfg.nms_iou))[: cfg.max_keep]


def body_only(body_dets: Sequence[Detection], cfg: FusionConfig = FusionConfig()) -> list[Detection]:
    return greedy_nms(list(body_dets), cfg.nms_iou)[: cfg.max_keep]


def group_by_image(dets: Sequence[Detection]) -> dict[int, list[Detection]]:
    out: dict[int, list[Detection]] = {}
    for d in dets:
        out.setdefault(d.image_id, []).append(d)
    return out
