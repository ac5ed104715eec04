"""scikit-learn compatible wrappers around the anchor, part and fusion machinery.

Boxes are passed as ``(n, 4)`` arrays of corner coordinates, heights as 1-D
arrays, so these objects drop into ``Pipeline`` / ``clone`` / ``get_params``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .anchors import AnchorConfig, derive_head_anchors, generate_body_anchors, quantized_scales
from .evaluation import SUBSETS, EvalConfig, evaluate
from .fusion import Detection, FusionConfig, pipeline_fuse
from .geometry import DEFAULT_PART_POOL, Box, cut_array, expand_array


def check_boxes(X, allow_empty: bool = True) -> np.ndarray:
    """Validate an ``(n, 4)`` corner array: finite, positive width and height."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_min_samples=0 if allow_empty else 1)
    if X.shape[1] != 4:
        raise ValueError(f"expected boxes of shape (n, 4), got {X.shape}")
    bad = np.flatnonzero(~((X[:, 2] > X[:, 0]) & (X[:, 3] > X[:, 1])))
    if bad.size:
        raise ValueError(f"boxes {bad[:5].tolist()} have non-positive width or height")
    return X


def check_heights(X) -> np.ndarray:
    """Accept a 1-D height vector, a column vector, or an ``(n, 4)`` box array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2 and X.shape[1] == 4:
        X = check_boxes(X)
        return X[:, 3] - X[:, 1]
    X = check_array(X.reshape(-1, 1), dtype=np.float64).ravel()
    if np.any(X <= 0):
        raise ValueError("heights must be positive")
    return X


class AnchorQuantizer(TransformerMixin, BaseEstimator):
    """Learn equal-population anchor scales from pedestrian heights.

    After ``fit``, ``scales_`` holds the ``num_bins + 1`` endpoints and
    ``body_anchors_`` / ``head_anchors_`` the derived templates;
    ``transform`` maps heights to their bin index in ``[0, num_bins - 1]``.
    """

    def __init__(self, num_bins=10, body_ratio=2.44, feature_stride=8.0):
        self.num_bins = num_bins
        self.body_ratio = body_ratio
        self.feature_stride = feature_stride

    def fit(self, X, y=None):
        cfg = AnchorConfig(self.num_bins, self.body_ratio, self.feature_stride)
        heights = check_heights(X)
        self.scales_ = np.array(quantized_scales(heights, cfg.num_bins))
        self.body_anchors_ = generate_body_anchors(cfg, self.scales_)
        self.head_anchors_ = derive_head_anchors(self.body_anchors_)
        return self

    def transform(self, X):
        check_is_fitted(self, "scales_")
        heights = check_heights(X)
        idx = np.searchsorted(self.scales_, heights, side="right") - 1
        return np.clip(idx, 0, self.num_bins - 1)


class PartCutter(TransformerMixin, BaseEstimator):
    """Cut a named part (default the s-head) out of body boxes; ``inverse_transform`` expands back."""

    def __init__(self, part="s-head"):
        self.part = part

    def fit(self, X=None, y=None):
        self.spec_ = DEFAULT_PART_POOL[self.part]
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        return cut_array(check_boxes(X), self.spec_)

    def inverse_transform(self, X):
        check_is_fitted(self, "spec_")
        return expand_array(check_boxes(X), self.spec_)


def _to_dets(X, branch: str, image_id: int = 0) -> list[Detection]:
    X = check_array(X, dtype=np.float64, ensure_min_samples=0)
    if X.shape[0] and X.shape[1] != 5:
        raise ValueError("expected rows of (x1, y1, x2, y2, score)")
    return [Detection(image_id, Box(*r[:4]), float(r[4]), branch) for r in X]


class BranchFusion(BaseEstimator):
    """Per-image body / s-head fusion on ``(n, 5)`` arrays of box + score rows."""

    def __init__(self, nms_iou=0.5, per_branch_prenms=True, max_keep=300):
        self.nms_iou = nms_iou
        self.per_branch_prenms = per_branch_prenms
        self.max_keep = max_keep

    def fit(self, X=None, y=None):
        self.config_ = FusionConfig(self.nms_iou, self.per_branch_prenms, self.max_keep)
        return self

    def predict(self, body, head=None):
        check_is_fitted(self, "config_")
        head = np.zeros((0, 5)) if head is None else head
        fused = pipeline_fuse(_to_dets(body, "body"), _to_dets(head, "s-head"), self.config_)
        return np.array([[*d.box.as_tuple(), d.score] for d in fused]).reshape(-1, 5)


class MissRateScorer(BaseEstimator):
    """Log-average miss rate of detections against ground truth fitted per image.

    ``fit`` takes ``{image_id: [GroundTruth]}``; ``evaluate`` takes
    ``{image_id: [Detection]}`` and returns MR-2 (lower is better), and
    ``score`` its negation for sklearn's higher-is-better convention.
    """

    def __init__(self, subset="reasonable", iou_thresh=0.5):
        self.subset = subset
        self.iou_thresh = iou_thresh

    def fit(self, gts_by_image, y=None):
        if self.subset not in SUBSETS:
            raise ValueError(f"unknown subset {self.subset!r}")
        self.config_ = EvalConfig(iou_thresh=self.iou_thresh, subset=SUBSETS[self.subset])
        self.gts_ = dict(gts_by_image)
        return self

    def evaluate(self, dets_by_image):
        check_is_fitted(self, "gts_")
        mr, self.curve_, _ = evaluate(dets_by_image, self.gts_, self.config_)
        return mr

    def score(self, dets_by_image, y=None):
        return -self.evaluate(dets_by_image)
