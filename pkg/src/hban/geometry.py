"""Box algebra and the cut/expand part transforms.

Boxes are continuous corner coordinates ``(x1, y1, x2, y2)`` with the origin at
the top-left of the image and ``y`` growing downward. A part of a body box is
described by a :class:`PartSpec`, a rectangle in fractions of the body box; the
semantic head (s-head) is the upper third of the body, restricted to its middle
two thirds in width.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

import numpy as np


class InvalidBoxError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for name in ("x1", "y1", "x2", "y2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(c) for c in coords):
            raise InvalidBoxError(f"non-finite box coordinates {coords}")
        if not (self.x2 > self.x1 and self.y2 > self.y1):
            raise InvalidBoxError(f"box must have positive width and height, got {coords}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def center(self) -> tuple[float, float]:
        return 0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def translate(self, dx: float, dy: float) -> "Box":
        return Box(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)

    def scale(self, factor: float) -> "Box":
        return Box(self.x1 * factor, self.y1 * factor, self.x2 * factor, self.y2 * factor)

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "Box":
        return cls(x, y, x + w, y + h)


@dataclass(frozen=True)
class PartSpec:
    """A sub-rectangle of a body box, in fractions of its width and height."""

    fx1: float
    fy1: float
    fx2: float
    fy2: float

    def __post_init__(self):
        if not (0 <= self.fx1 < self.fx2 <= 1 and 0 <= self.fy1 < self.fy2 <= 1):
            raise ValueError(f"invalid part fractions {self.as_tuple()}")

    @property
    def area_fraction(self) -> float:
        return (self.fx2 - self.fx1) * (self.fy2 - self.fy1)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.fx1, self.fy1, self.fx2, self.fy2)


S_HEAD = PartSpec(1 / 6, 0.0, 5 / 6, 1 / 3)

# exact fractions, used to check the equal-area constraint without rounding noise
_DEFAULT_PART_FRACTIONS = {
    "s-head": (Fraction(1, 6), Fraction(0), Fraction(5, 6), Fraction(1, 3)),
    "middle": (Fraction(1, 6), Fraction(1, 3), Fraction(5, 6), Fraction(2, 3)),
    "lower": (Fraction(1, 6), Fraction(2, 3), Fraction(5, 6), Fraction(1)),
    "left": (Fraction(0), Fraction(1, 6), Fraction(1, 3), Fraction(5, 6)),
    "right": (Fraction(2, 3), Fraction(1, 6), Fraction(1), Fraction(5, 6)),
}
PART_AREA = Fraction(2, 9)


class PartPool(Mapping[str, PartSpec]):
    """Named part specs that all cover the same fraction of the body box.

    Passing ``fractions`` overrides the default geometry; every entry must still
    cover exactly ``area`` of the body (checked with exact rational arithmetic
    when the fractions are given as :class:`fractions.Fraction` or ints, and to
    1e-12 otherwise).
    """

    def __init__(self, fractions: Optional[Mapping[str, tuple | PartSpec]] = None, area=PART_AREA):
        fractions = dict(_DEFAULT_PART_FRACTIONS if fractions is None else fractions)
        specs = {}
        for name, vals in fractions.items():
            fx1, fy1, fx2, fy2 = vals.as_tuple() if isinstance(vals, PartSpec) else vals
            frac_area = (fx2 - fx1) * (fy2 - fy1)
            if isinstance(frac_area, (Fraction, int)) and isinstance(area, (Fraction, int)):
                equal = frac_area == area
            else:
                equal = abs(float(frac_area) - float(area)) <= 1e-12
            if not equal:
                raise ValueError(f"part {name!r} covers {frac_area} of the body, expected {area}")
            specs[name] = PartSpec(float(fx1), float(fy1), float(fx2), float(fy2))
        self._specs = specs
        self.area = area

    def __getitem__(self, name: str) -> PartSpec:
        return self._specs[name]

    def __iter__(self):
        return iter(self._specs)

    def __len__(self) -> int:
        return len(self._specs)

    def to_dict(self) -> dict:
        return {name: list(spec.as_tuple()) for name, spec in self._specs.items()}

    @classmethod
    def from_dict(cls, data: Mapping[str, list]) -> "PartPool":
        return cls({name: tuple(float(v) for v in vals) for name, vals in data.items()}, area=float(PART_AREA))


DEFAULT_PART_POOL = PartPool()


def area(b: Box) -> float:
    return (b.x2 - b.x1) * (b.y2 - b.y1)


def intersection(a: Box, b: Box) -> Optional[Box]:
    """Overlap of two boxes, or ``None`` when they do not overlap with positive area."""
    x1, y1 = max(a.x1, b.x1), max(a.y1, b.y1)
    x2, y2 = min(a.x2, b.x2), min(a.y2, b.y2)
    if x2 <= x1 or y2 <= y1:
        return None
    return Box(x1, y1, x2, y2)


def _inter_area(a: Box, b: Box) -> float:
    w = min(a.x2, b.x2) - max(a.x1, b.x1)
    h = min(a.y2, b.y2) - max(a.y1, b.y1)
    if w <= 0 or h <= 0:
        return 0.0
    return w * h


def iou(a: Box, b: Box) -> float:
    if a == b:
        return 1.0
    inter = _inter_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (area(a) + area(b) - inter)


def intersection_over_area(det: Box, region: Box) -> float:
    """Fraction of ``det`` covered by ``region``."""
    return _inter_area(det, region) / area(det)


def cut_part(b: Box, spec: PartSpec = S_HEAD) -> Box:
    w, h = b.width, b.height
    return Box(b.x1 + spec.fx1 * w, b.y1 + spec.fy1 * h, b.x1 + spec.fx2 * w, b.y1 + spec.fy2 * h)


def expand_part(p: Box, spec: PartSpec = S_HEAD) -> Box:
    """Inverse of :func:`cut_part`: recover the body box a part was cut from."""
    w = p.width / (spec.fx2 - spec.fx1)
    h = p.height / (spec.fy2 - spec.fy1)
    x1 = p.x1 - spec.fx1 * w
    y1 = p.y1 - spec.fy1 * h
    return Box(x1, y1, x1 + w, y1 + h)


def clip_to_image(b: Box, width: float, height: float) -> Optional[Box]:
    """Clip ``b`` to the image rectangle; ``None`` when nothing remains."""
    if width <= 0 or height <= 0:
        raise ValueError("image dimensions must be positive")
    return intersection(b, Box(0.0, 0.0, float(width), float(height)))


# -- array helpers -----------------------------------------------------------


def boxes_to_array(boxes) -> np.ndarray:
    if len(boxes) == 0:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64)


def pairwise_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """IoU matrix between two ``(N, 4)`` and ``(M, 4)`` corner arrays."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    union = area_a[:, None] + area_b[None, :] - inter
    out = inter / union
    same = np.all(a[:, None, :] == b[None, :, :], axis=2)
    out[same] = 1.0
    return out


def pairwise_ioa(dets: np.ndarray, regions: np.ndarray) -> np.ndarray:
    """Intersection over detection area, ``(N, M)``."""
    dets = np.asarray(dets, dtype=np.float64).reshape(-1, 4)
    regions = np.asarray(regions, dtype=np.float64).reshape(-1, 4)
    area_d = (dets[:, 2] - dets[:, 0]) * (dets[:, 3] - dets[:, 1])
    iw = np.minimum(dets[:, None, 2], regions[None, :, 2]) - np.maximum(dets[:, None, 0], regions[None, :, 0])
    ih = np.minimum(dets[:, None, 3], regions[None, :, 3]) - np.maximum(dets[:, None, 1], regions[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    return inter / area_d[:, None]


def cut_array(boxes: np.ndarray, spec: PartSpec = S_HEAD) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    w = boxes[:, 2] - boxes[:, 0]
    h = boxes[:, 3] - boxes[:, 1]
    return np.stack(
        [boxes[:, 0] + spec.fx1 * w, boxes[:, 1] + spec.fy1 * h,
         boxes[:, 0] + spec.fx2 * w, boxes[:, 1] + spec.fy2 * h],
        axis=1,
    )


def expand_array(parts: np.ndarray, spec: PartSpec = S_HEAD) -> np.ndarray:
    parts = np.asarray(parts, dtype=np.float64).reshape(-1, 4)
    w = (parts[:, 2] - parts[:, 0]) / (spec.fx2 - spec.fx1)
    h = (parts[:, 3] - parts[:, 1]) / (spec.fy2 - spec.fy1)
    x1 = parts[:, 0] - spec.fx1 * w
    y1 = parts[:, 1] - spec.fy1 * h
    return np.stack([x1, y1, x1 + w, y1 + h], axis=1)
