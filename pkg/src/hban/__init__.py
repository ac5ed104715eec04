"""Head-body alignment for occluded pedestrian detection.

Semantic-head geometry, quantized anchors, dual-branch label assignment, the
alignment loss stack, branch fusion with NMS and the MR-2 / AR evaluation
protocol, plus a deterministic synthetic crowd benchmark.
"""

__version__ = "0.1.0"

from .anchors import AnchorConfig, AnchorSet, derive_head_anchors, generate_body_anchors, quantized_scales
from .assignment import AssignConfig, GroundTruth, RoiLabels, assign_labels, ignore_filter, label_rois
from .evaluation import EvalConfig, SubsetSpec, average_recall_curve, fppi_miss_curve, log_average_miss_rate
from .fusion import Detection, FusionConfig, greedy_nms, pipeline_fuse
from .geometry import S_HEAD, Box, PartPool, PartSpec, area, cut_part, expand_part, iou
from .losses import LossConfig, align_loss, branch_loss, rcnn_total_loss, smooth_l1

__all__ = [
    "AnchorConfig", "AnchorSet", "AssignConfig", "Box", "Detection", "EvalConfig", "FusionConfig",
    "GroundTruth", "LossConfig", "PartPool", "PartSpec", "RoiLabels", "S_HEAD", "SubsetSpec",
    "align_loss", "area", "assign_labels", "average_recall_curve", "branch_loss", "cut_part",
    "derive_head_anchors", "expand_part", "fppi_miss_curve", "generate_body_anchors", "greedy_nms",
    "ignore_filter", "iou", "label_rois", "log_average_miss_rate", "pipeline_fuse", "quantized_scales",
    "rcnn_total_loss", "smooth_l1",
]
