"""Oriented-bounding-box toolkit.

Rotated-box representations under the OC/LE90/LE135 angle conventions, exact
rotated IoU and NMS via convex polygon clipping, Gaussian box distances
(GWD/KLD/KFIoU), PASCAL-style rotated-detection evaluation, and DOTA-format
file I/O with huge-image split planning and result merging.
"""

from .errors import (
    DegenerateInput,
    InvalidGeometry,
    MixedImageOrCategory,
    NonFiniteInput,
    NotPD,
    NotPSD,
    ObbkitError,
    ParseError,
    UnknownCategory,
)
from .geometry import (
    AngleConvention,
    Gaussian2D,
    QuadPoly,
    RotatedBox,
    convert,
    gaussian_to_rbox,
    min_area_rect,
    normalize,
    quad_to_rbox,
    rbox_to_gaussian,
    rbox_to_quad,
)
from .overlap import (
    ConvexPoly,
    ScoredBox,
    intersect_area,
    iou_matrix,
    rotated_iou,
    rotated_nms,
    scored_boxes,
)
from .gaussian_metrics import (
    GaussianDistanceKind,
    box_distance,
    gwd,
    kfiou,
    kld,
    loss_transform,
    sqrtm_2x2,
)
from .evaluation import (
    DetectionRecord,
    EvalReport,
    GroundTruthRecord,
    average_precision,
    confusion_matrix,
    evaluate,
    match_detections,
)
from .dota_io import (
    AnnotationFile,
    AnnotationRecord,
    PatchDetection,
    SplitPlan,
    annotation_to_ground_truth,
    clip_annotations,
    merge_results,
    multi_scale_plans,
    parse_annotation,
    parse_results,
    read_annotation_file,
    scale_annotation,
    split_plan,
    write_results,
)

__version__ = "0.1.0"

__all__ = [
    "AngleConvention", "RotatedBox", "QuadPoly", "Gaussian2D",
    "normalize", "convert", "rbox_to_quad", "quad_to_rbox", "min_area_rect",
    "rbox_to_gaussian", "gaussian_to_rbox",
    "ConvexPoly", "ScoredBox", "scored_boxes",
    "intersect_area", "rotated_iou", "iou_matrix", "rotated_nms",
    "GaussianDistanceKind", "gwd", "kld", "kfiou", "loss_transform",
    "box_distance", "sqrtm_2x2",
    "GroundTruthRecord", "DetectionRecord", "EvalReport",
    "match_detections", "average_precision", "evaluate", "confusion_matrix",
    "AnnotationFile", "AnnotationRecord", "SplitPlan", "PatchDetection",
    "parse_annotation", "read_annotation_file", "parse_results", "write_results",
    "annotation_to_ground_truth", "split_plan", "clip_annotations",
    "merge_results", "multi_scale_plans", "scale_annotation",
    "ObbkitError", "NonFiniteInput", "DegenerateInput", "NotPSD", "NotPD",
    "InvalidGeometry", "MixedImageOrCategory", "UnknownCategory", "ParseError",
]
