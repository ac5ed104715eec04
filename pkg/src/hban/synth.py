"""Deterministic synthetic crowd scenes and a CNN-free proposal scorer.

Scenes are pure geometry: pedestrians with a fixed 0.41 aspect ratio standing
on a ground plane (taller means nearer, hence a lower bottom edge), some of them
partially covered by a nearer occluding object. Visible boxes stay rectangular:
each occluded pedestrian loses a single strip from its bottom, left or right
side.

The proposal scorer stands in for a trained two-branch detector. Body
proposals of an occluded pedestrian drift toward its visible part and their
scores are damped by how much of the pedestrian is hidden; s-head scores are
damped only by how much of the head region is hidden. A pedestrian's own bottom
occluder never reaches its head, so bottom-occluded pedestrians keep full head
scores. This is a deliberate, synthetic construction of the head-visibility
premise, not a model of real detector behaviour.

Random numbers
--------------
All randomness comes from :class:`SplitMix64`, a 64-bit generator simple
enough to re-implement anywhere::

    state = (state + 0x9E3779B97F4A7C15) mod 2**64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    return z ^ (z >> 31)

``uniform()`` is ``(next >> 11) * 2**-53``; ``normal()`` is Box-Muller on two
uniforms, ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``. A scene's stream is seeded
with ``derive_seed(seed, index, stream)`` so scenes can be built in any order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .assignment import GroundTruth
from .evaluation import HEAVY, REASONABLE, EvalConfig, average_recall_curve, evaluate, occlusion_ratio
from .fusion import Detection, FusionConfig, body_only, head_only, pipeline_fuse
from .geometry import S_HEAD, Box, area, boxes_to_array, cut_array, cut_part, intersection, pairwise_iou

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
ASPECT = 0.41  # width / height

STREAM_SCENE = 0
STREAM_PROPOSALS = 1


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    s = seed & MASK64
    for k in keys:
        s = _mix64((s + GOLDEN * (k + 1)) & MASK64)
    return s


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return _mix64(self.state)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0 ** -53)

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return mu + sigma * math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def randint(self, lo: int, hi: int) -> int:
        """Integer in ``[lo, hi]`` inclusive."""
        return lo + int(self.uniform() * (hi - lo + 1))

    def bernoulli(self, p: float) -> bool:
        return self.uniform() < p


@dataclass(frozen=True)
class SceneConfig:
    image_w: float = 1024.0
    image_h: float = 512.0
    peds_per_image: tuple[int, int] = (3, 10)
    height_range: tuple[float, float] = (50.0, 400.0)
    aspect: float = ASPECT
    occlusion_prob: float = 0.5
    seed: int = 42
    horizon: float = 0.4  # fraction of image height

    def __post_init__(self):
        object.__setattr__(self, "peds_per_image", tuple(int(v) for v in self.peds_per_image))
        object.__setattr__(self, "height_range", tuple(float(v) for v in self.height_range))
        lo, hi = self.peds_per_image
        if not 0 <= lo <= hi:
            raise ValueError("peds_per_image must be an ordered non-negative range")
        hlo, hhi = self.height_range
        if not 0 < hlo <= hhi:
            raise ValueError("height_range must be an ordered positive range")
        if not self.aspect > 0:
            raise ValueError("aspect must be positive")
        if not 0 <= self.occlusion_prob <= 1:
            raise ValueError("occlusion_prob must lie in [0, 1]")
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError("image dimensions must be positive")


@dataclass(frozen=True)
class ScorerConfig:
    noise_sigma: float = 0.05
    head_weight: float = 1.0
    body_weight: float = 1.0
    proposals_per_gt: int = 8
    jitter_sigma: float = 0.08
    background_per_image: int = 30
    visible_bias: float = 0.5

    def __post_init__(self):
        if self.noise_sigma < 0 or self.jitter_sigma < 0:
            raise ValueError("sigmas must be >= 0")
        if not 0 <= self.visible_bias <= 1:
            raise ValueError("visible_bias must lie in [0, 1]")
        if self.proposals_per_gt < 0 or self.background_per_image < 0:
            raise ValueError("proposal counts must be >= 0")


@dataclass
class SyntheticScene:
    image_id: int
    width: float
    height: float
    gts: list  # GroundTruth, far to near
    occluders: list = field(default_factory=list)  # (Box, depth)
    occlusion: list = field(default_factory=list)
    occlusion_side: list = field(default_factory=list)


# -- scenes ------------------------------------------------------------------


def _place_occluder(rng: SplitMix64, full: Box) -> Box:
    w, h = full.width, full.height
    side = rng.uniform()
    if side < 0.6:
        f = rng.uniform(0.1, 0.65)
        return Box(full.x1 - 0.2 * w, full.y2 - f * h, full.x2 + 0.2 * w, full.y2 + 0.05 * h)
    f = rng.uniform(0.1, 0.6)
    if side < 0.8:
        return Box(full.x1 - 0.5 * w, full.y1 - 0.1 * h, full.x1 + f * w, full.y2 + 0.1 * h)
    return Box(full.x2 - f * w, full.y1 - 0.1 * h, full.x2 + 0.5 * w, full.y2 + 0.1 * h)


def _strip_visible(full: Box, occ: Box, min_keep: float = 0.05) -> tuple[Box, str]:
    """Visible rectangle after removing the strip facing ``occ``."""
    u = (0.5 * (occ.x1 + occ.x2) - 0.5 * (full.x1 + full.x2)) / full.width
    v = (0.5 * (occ.y1 + occ.y2) - 0.5 * (full.y1 + full.y2)) / full.height
    if v > abs(u):
        y2 = min(full.y2, max(occ.y1, full.y1 + min_keep * full.height))
        return Box(full.x1, full.y1, full.x2, y2), "bottom"
    if u < 0:
        x1 = max(full.x1, min(occ.x2, full.x2 - min_keep * full.width))
        return Box(x1, full.y1, full.x2, full.y2), "left"
    x2 = min(full.x2, max(occ.x1, full.x1 + min_keep * full.width))
    return Box(full.x1, full.y1, x2, full.y2), "right"


def compute_visibility(scene: SyntheticScene) -> list[tuple[Box, float, str]]:
    """Visible box, occlusion ratio and occluded side for each ground truth.

    Only occluders nearer than a pedestrian (larger bottom edge) can hide it;
    the one with the largest overlap decides which single strip is removed.
    """
    out = []
    for g in scene.gts:
        best, best_area = None, 0.0
        for box, depth in scene.occluders:
            if depth <= g.full.y2:
                continue
            inter = intersection(g.full, box)
            if inter is not None and area(inter) > best_area:
                best, best_area = box, area(inter)
        if best is None:
            out.append((g.full, 0.0, "none"))
            continue
        vis, side = _strip_visible(g.full, best)
        out.append((vis, 1.0 - area(vis) / area(g.full), side))
    return out


def generate_scene(cfg: SceneConfig, index: int) -> SyntheticScene:
    rng = SplitMix64(derive_seed(cfg.seed, index, STREAM_SCENE))
    n = rng.randint(*cfg.peds_per_image)
    hlo, hhi = cfg.height_range
    horizon = cfg.horizon * cfg.image_h
    peds = []
    for _ in range(n):
        h = math.exp(rng.uniform(math.log(hlo), math.log(hhi)))
        w = cfg.aspect * h
        slope = rng.uniform(0.5, 0.6)
        y2 = horizon + slope * h
        cx = rng.uniform(0.5 * w, max(0.5 * w, cfg.image_w - 0.5 * w))
        peds.append(Box(cx - 0.5 * w, y2 - h, cx + 0.5 * w, y2))
    # far to near: the bottom edge is the depth key
    peds.sort(key=lambda b: (b.y2, b.x1))
    occluders = []
    for b in peds:
        if rng.bernoulli(cfg.occlusion_prob):
            # just in front of its pedestrian, behind anything nearer
            occluders.append((_place_occluder(rng, b), b.y2 + 1e-3))
    scene = SyntheticScene(index, cfg.image_w, cfg.image_h, [GroundTruth(b, None, False, i) for i, b in enumerate(peds)], occluders)
    vis = compute_visibility(scene)
    scene.gts = [GroundTruth(g.full, v, False, g.id) for g, (v, _, _) in zip(scene.gts, vis)]
    scene.occlusion = [o for _, o, _ in vis]
    scene.occlusion_side = [side for _, _, side in vis]
    return scene


# -- proposals ---------------------------------------------------------------


def _jitter(rng: SplitMix64, b: Box, sigma: float) -> Box:
    if sigma == 0:
        return b
    w, h = b.width, b.height
    cx = 0.5 * (b.x1 + b.x2) + rng.normal(0, sigma * w)
    cy = 0.5 * (b.y1 + b.y2) + rng.normal(0, sigma * h)
    nh = h * math.exp(rng.normal(0, sigma))
    nw = w * math.exp(rng.normal(0, sigma))
    return Box(cx - 0.5 * nw, cy - 0.5 * nh, cx + 0.5 * nw, cy + 0.5 * nh)


def _lerp_box(a: Box, b: Box, t: float) -> Box:
    return Box(*((1 - t) * u + t * v for u, v in zip(a.as_tuple(), b.as_tuple())))


def _random_box(rng: SplitMix64, scene_cfg: SceneConfig, w_img: float, h_img: float) -> Box:
    hlo, hhi = scene_cfg.height_range
    h = math.exp(rng.uniform(math.log(hlo), math.log(hhi)))
    w = scene_cfg.aspect * h
    x1 = rng.uniform(0.0, max(0.0, w_img - w))
    y1 = rng.uniform(0.0, max(0.0, h_img - h))
    return Box(x1, y1, x1 + w, y1 + h)


def _head_visibility(g: GroundTruth) -> float:
    head = cut_part(g.full, S_HEAD)
    if g.visible is None:
        return 1.0
    inter = intersection(head, g.visible)
    return 0.0 if inter is None else area(inter) / area(head)


def _scores(rng: SplitMix64, boxes: list, refs: np.ndarray, weights: np.ndarray, gain: float, sigma: float) -> list:
    if not boxes:
        return []
    base = np.zeros(len(boxes))
    if refs.shape[0]:
        base = (pairwise_iou(boxes_to_array(boxes), refs) * weights[None, :]).max(axis=1)
    out = []
    for v in base.tolist():
        noise = rng.normal(0.0, sigma) if sigma > 0 else 0.0
        out.append(min(1.0, max(0.0, gain * v + noise)))
    return out


def propose(scene: SyntheticScene, scorer: ScorerConfig, rng: SplitMix64, scene_cfg: Optional[SceneConfig] = None):
    """Body and s-head detections for one scene.

    Each ground truth yields ``proposals_per_gt`` jittered body boxes and as
    many jittered s-head boxes. Body boxes are jittered around the full box
    moved ``visible_bias`` of the way toward the visible box, mimicking a body
    detector that latches onto the visible part of an occluded pedestrian; each branch also gets
    ``background_per_image`` random boxes. Scores are the best IoU with a
    ground truth (in the branch's own frame) times that ground truth's
    visible fraction for the branch, plus gaussian noise, clipped to [0, 1].
    """
    scene_cfg = scene_cfg or SceneConfig()
    gts = [g for g in scene.gts if not g.ignore]
    body_boxes, head_boxes = [], []
    for g in gts:
        head = cut_part(g.full, S_HEAD)
        # body proposals drift toward whatever part of the pedestrian is visible
        body_center = g.full if g.visible is None else _lerp_box(g.full, g.visible, scorer.visible_bias)
        for _ in range(scorer.proposals_per_gt):
            body_boxes.append(_jitter(rng, body_center, scorer.jitter_sigma))
            head_boxes.append(_jitter(rng, head, scorer.jitter_sigma))
    for _ in range(scorer.background_per_image):
        body_boxes.append(_random_box(rng, scene_cfg, scene.width, scene.height))
        head_boxes.append(cut_part(_random_box(rng, scene_cfg, scene.width, scene.height), S_HEAD))

    full = boxes_to_array([g.full for g in gts])
    body_vis = np.array([1.0 - occlusion_ratio(g) for g in gts])
    head_vis = np.array([_head_visibility(g) for g in gts])
    body_scores = _scores(rng, body_boxes, full, body_vis, scorer.body_weight, scorer.noise_sigma)
    head_scores = _scores(rng, head_boxes, cut_array(full), head_vis, scorer.head_weight, scorer.noise_sigma)
    body = [Detection(scene.image_id, b, s, "body") for b, s in zip(body_boxes, body_scores)]
    heads = [Detection(scene.image_id, b, s, "s-head") for b, s in zip(head_boxes, head_scores)]
    return body, heads


# -- benchmark ---------------------------------------------------------------

CONFIGURATIONS = ("body-only", "head-only", "fused")


@dataclass
class BenchmarkRow:
    configuration: str
    mr_reasonable: float
    mr_heavy: float
    ar: list  # (k, AR)
    num_detections: int


@dataclass
class BenchmarkReport:
    rows: list
    scenes: list
    raw: dict  # image_id -> (body dets, head dets)
    outputs: dict  # configuration -> {image_id: dets}
    conservation_ok: bool = True

    def row(self, configuration: str) -> BenchmarkRow:
        for r in self.rows:
            if r.configuration == configuration:
                return r
        raise KeyError(configuration)


def run_benchmark(
    scene_cfg: SceneConfig = SceneConfig(),
    scorer_cfg: ScorerConfig = ScorerConfig(),
    fusion_cfg: FusionConfig = FusionConfig(),
    eval_cfg: EvalConfig = EvalConfig(),
    num_images: int = 200,
    budgets: Sequence[int] = (10, 100, 300),
) -> BenchmarkReport:
    """Propose, fuse and evaluate every configuration on ``num_images`` scenes."""
    scenes = [generate_scene(scene_cfg, i) for i in range(num_images)]
    gts_by_image = {s.image_id: s.gts for s in scenes}
    raw = {}
    outputs = {c: {} for c in CONFIGURATIONS}
    for s in scenes:
        rng = SplitMix64(derive_seed(scene_cfg.seed, s.image_id, STREAM_PROPOSALS))
        body, heads = propose(s, scorer_cfg, rng, scene_cfg)
        raw[s.image_id] = (body, heads)
        outputs["body-only"][s.image_id] = body_only(body, fusion_cfg)
        outputs["head-only"][s.image_id] = head_only(heads, fusion_cfg)
        outputs["fused"][s.image_id] = pipeline_fuse(body, heads, fusion_cfg)

    rows = []
    conserved = True
    for c in CONFIGURATIONS:
        mrs = []
        for subset in (REASONABLE, HEAVY):
            cfg = EvalConfig(eval_cfg.iou_thresh, eval_cfg.fppi_refs, subset)
            try:
                mr, _, results = evaluate(outputs[c], gts_by_image, cfg)
            except ValueError:
                mr, results = float("nan"), []
            for r in results:
                conserved &= r.num_tp + r.num_fp + r.num_ignored == len(r.det_status)
            mrs.append(mr)
        ar = average_recall_curve(outputs[c], gts_by_image, budgets, eval_cfg.iou_thresh)
        n_det = sum(len(v) for v in outputs[c].values())
        rows.append(BenchmarkRow(c, mrs[0], mrs[1], ar, n_det))
    return BenchmarkReport(rows, scenes, raw, outputs, conserved)
