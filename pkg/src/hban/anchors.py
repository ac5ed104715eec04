"""Quantized anchor scales and body / s-head anchor templates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import S_HEAD, Box, PartSpec, clip_to_image

BODY_RATIO = 2.44  # height / width, i.e. 1 / 0.41


@dataclass(frozen=True)
class AnchorConfig:
    num_bins: int = 10
    body_ratio: float = BODY_RATIO
    feature_stride: float = 8.0

    def __post_init__(self):
        if int(self.num_bins) != self.num_bins or self.num_bins < 1:
            raise ValueError("num_bins must be a positive integer")
        if not self.body_ratio > 0:
            raise ValueError("body_ratio must be positive")
        if not self.feature_stride > 0:
            raise ValueError("feature_stride must be positive")


@dataclass(frozen=True)
class AnchorTemplate:
    height: float
    ratio: float  # height / width

    @property
    def width(self) -> float:
        return self.height / self.ratio

    @property
    def area(self) -> float:
        return self.height * self.width


@dataclass(frozen=True)
class AnchorSet:
    templates: tuple[AnchorTemplate, ...]
    branch: str = "body"

    def __post_init__(self):
        if self.branch not in ("body", "s-head"):
            raise ValueError(f"unknown branch {self.branch!r}")
        heights = [t.height for t in self.templates]
        if any(h <= 0 for h in heights):
            raise ValueError("anchor heights must be positive")
        if any(b <= a for a, b in zip(heights, heights[1:])):
            raise ValueError("anchor heights must be strictly increasing")

    def __len__(self) -> int:
        return len(self.templates)

    @property
    def heights(self) -> list[float]:
        return [t.height for t in self.templates]

    @property
    def widths(self) -> list[float]:
        return [t.width for t in self.templates]


def quantized_scales(heights: Sequence[float], num_bins: int = 10) -> list[float]:
    """Endpoints of ``num_bins`` equal-population bins over ``heights``.

    Returns the empirical quantiles at ``k / num_bins`` for ``k = 0..num_bins``,
    interpolating linearly between order statistics at fractional index
    ``q * (n - 1)``.
    """
    h = np.asarray(heights, dtype=np.float64).ravel()
    if h.size < 2:
        raise ValueError("need at least 2 heights to quantize")
    if not np.all(np.isfinite(h)) or np.any(h <= 0):
        raise ValueError("heights must be finite and positive")
    if int(num_bins) != num_bins or num_bins < 1:
        raise ValueError("num_bins must be a positive integer")
    h = np.sort(h)
    pos = np.arange(num_bins + 1) * (h.size - 1) / num_bins
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, h.size - 1)
    frac = pos - lo
    scales = h[lo] + frac * (h[hi] - h[lo])
    return [float(s) for s in np.maximum.accumulate(scales)]


def generate_body_anchors(cfg: AnchorConfig, scales: Sequence[float]) -> AnchorSet:
    """One template per distinct scale, with height = scale and width = height / ratio.

    Repeated scales (a degenerate height distribution) collapse to a single
    template since anchor heights must be strictly increasing.
    """
    uniq = sorted(set(float(s) for s in scales))
    return AnchorSet(tuple(AnchorTemplate(s, cfg.body_ratio) for s in uniq), branch="body")


def derive_head_anchors(body: AnchorSet, spec: PartSpec = S_HEAD) -> AnchorSet:
    """Apply the part cut to each body template: 2/9 of the area for the s-head."""
    fw = spec.fx2 - spec.fx1
    fh = spec.fy2 - spec.fy1
    templates = tuple(AnchorTemplate(t.height * fh, t.ratio * fh / fw) for t in body.templates)
    return AnchorSet(templates, branch="s-head")


def tile_anchors(anchors: AnchorSet, image_w: float, image_h: float, stride: float) -> np.ndarray:
    """Center every template at each stride-spaced grid point and clip to the image.

    Returns an ``(N, 4)`` array ordered grid-row-major, template-minor. Anchors
    that fall completely outside the image are dropped.
    """
    if stride <= 0:
        raise ValueError("stride must be positive")
    xs = np.arange(stride / 2, image_w, stride)
    ys = np.arange(stride / 2, image_h, stride)
    out = []
    for cy in ys:
        for cx in xs:
            for t in anchors.templates:
                b = Box(cx - t.width / 2, cy - t.height / 2, cx + t.width / 2, cy + t.height / 2)
                clipped = clip_to_image(b, image_w, image_h)
                if clipped is not None:
                    out.append(clipped.as_tuple())
    return np.array(out, dtype=np.float64).reshape(-1, 4)
