"""Annotation and detection files.

Both are UTF-8 JSON documents. An annotation file::

    {"images": [{"id": 0, "width": 2048, "height": 1024,
                 "annotations": [{"bbox": [x1, y1, x2, y2],
                                  "vis_bbox": [x1, y1, x2, y2],   # optional
                                  "ignore": false}]}]}

A detection file::

    {"detections": [{"image_id": 0, "bbox": [x1, y1, x2, y2],
                     "score": 0.93, "branch": "body"}]}          # branch optional

Coordinates are corner pixels. Writers emit sorted keys and the shortest
decimal that round-trips each float, so ``write(parse(x))`` is stable after one
pass. Unknown keys and invariant violations are rejected, never repaired.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .assignment import GroundTruth
from .fusion import BRANCHES, Detection
from .geometry import Box, InvalidBoxError


class SchemaError(ValueError):
    pass


@dataclass
class ImageRecord:
    id: int
    width: float
    height: float
    gts: list = field(default_factory=list)


@dataclass
class AnnotationFile:
    images: list

    def by_id(self) -> dict[int, ImageRecord]:
        return {im.id: im for im in self.images}

    def gts_by_image(self) -> dict[int, list[GroundTruth]]:
        return {im.id: im.gts for im in self.images}


def _check_keys(obj, allowed: set, required: set, where: str):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise SchemaError(f"{where}: missing keys {sorted(missing)}")


def _number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SchemaError(f"{where}: expected a finite number, got {v!r}")
    return float(v)


def _box(v, where: str) -> Box:
    if not isinstance(v, list) or len(v) != 4:
        raise SchemaError(f"{where}: expected [x1, y1, x2, y2]")
    try:
        return Box(*(_number(c, where) for c in v))
    except InvalidBoxError as e:
        raise SchemaError(f"{where}: {e}") from None


def _load(source) -> object:
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith(("{", "[")):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"malformed JSON: {e}") from None


def parse_annotations(source) -> AnnotationFile:
    """Parse an annotation document from a path or a JSON string."""
    doc = _load(source)
    _check_keys(doc, {"images"}, {"images"}, "annotation file")
    if not isinstance(doc["images"], list):
        raise SchemaError("annotation file: 'images' must be a list")
    images, seen = [], set()
    for n, rec in enumerate(doc["images"]):
        where = f"image #{n}"
        _check_keys(rec, {"id", "width", "height", "annotations"}, {"id", "width", "height", "annotations"}, where)
        image_id = rec["id"]
        if isinstance(image_id, bool) or not isinstance(image_id, int):
            raise SchemaError(f"{where}: id must be an integer")
        where = f"image {image_id}"
        if image_id in seen:
            raise SchemaError(f"{where}: duplicate image id")
        seen.add(image_id)
        width, height = _number(rec["width"], where), _number(rec["height"], where)
        if width <= 0 or height <= 0:
            raise SchemaError(f"{where}: width and height must be positive")
        if not isinstance(rec["annotations"], list):
            raise SchemaError(f"{where}: 'annotations' must be a list")
        gts = []
        for k, ann in enumerate(rec["annotations"]):
            aw = f"image {image_id}, annotation {k}"
            _check_keys(ann, {"bbox", "vis_bbox", "ignore"}, {"bbox"}, aw)
            full = _box(ann["bbox"], aw + " bbox")
            vis = None
            if ann.get("vis_bbox") is not None:
                vis = _box(ann["vis_bbox"], aw + " vis_bbox")
            ignore = ann.get("ignore", False)
            if not isinstance(ignore, bool):
                raise SchemaError(f"{aw}: ignore must be a boolean")
            try:
                gts.append(GroundTruth(full, vis, ignore, k))
            except ValueError as e:
                raise SchemaError(f"{aw}: {e}") from None
        images.append(ImageRecord(image_id, width, height, gts))
    return AnnotationFile(images)


def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def annotations_to_json(ann: AnnotationFile) -> str:
    images = []
    for im in ann.images:
        anns = []
        for g in im.gts:
            rec = {"bbox": list(g.full.as_tuple()), "ignore": g.ignore}
            if g.visible is not None:
                rec["vis_bbox"] = list(g.visible.as_tuple())
            anns.append(rec)
        images.append({"id": im.id, "width": im.width, "height": im.height, "annotations": anns})
    return _dump({"images": images})


def write_annotations(path, ann: AnnotationFile) -> None:
    Path(path).write_text(annotations_to_json(ann), encoding="utf-8")


def parse_detections(source, default_branch: Optional[str] = None) -> list[Detection]:
    """Parse a detection document; entries without a branch get ``default_branch`` (or body)."""
    doc = _load(source)
    _check_keys(doc, {"detections"}, {"detections"}, "detection file")
    if not isinstance(doc["detections"], list):
        raise SchemaError("detection file: 'detections' must be a list")
    out = []
    for n, rec in enumerate(doc["detections"]):
        where = f"detection {n}"
        _check_keys(rec, {"image_id", "bbox", "score", "branch"}, {"image_id", "bbox", "score"}, where)
        image_id = rec["image_id"]
        if isinstance(image_id, bool) or not isinstance(image_id, int):
            raise SchemaError(f"{where}: image_id must be an integer")
        where = f"detection {n} (image {image_id})"
        score = _number(rec["score"], where)
        if not 0.0 <= score <= 1.0:
            raise SchemaError(f"{where}: score {score} outside [0, 1]")
        branch = rec.get("branch") or default_branch or "body"
        if branch not in BRANCHES:
            raise SchemaError(f"{where}: unknown branch {branch!r}")
        out.append(Detection(image_id, _box(rec["bbox"], where + " bbox"), score, branch))
    return out


def detections_to_json(dets: Iterable[Detection]) -> str:
    recs = [
        {"image_id": d.image_id, "bbox": list(d.box.as_tuple()), "score": d.score, "branch": d.branch}
        for d in dets
    ]
    return _dump({"detections": recs})


def write_detections(path, dets: Iterable[Detection]) -> None:
    Path(path).write_text(detections_to_json(dets), encoding="utf-8")


def check_image_ids(dets: Sequence[Detection], ann: AnnotationFile) -> None:
    known = {im.id for im in ann.images}
    for n, d in enumerate(dets):
        if d.image_id not in known:
            raise SchemaError(f"detection {n}: image_id {d.image_id} not in the annotation file")
