"""Rotated-detection evaluation: greedy IoU matching, per-class average
precision (VOC07 11-point or continuous), dataset mAP, and the class-agnostic
confusion matrix.

Difficult ground truths follow PASCAL semantics: detections matching one are
neither true nor false positives, and difficult objects are excluded from the
recall denominator.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import MixedImageOrCategory, UnknownCategory
from .geometry import RotatedBox
from .overlap import iou_matrix

TP = "tp"
FP = "fp"

AP_MODES = ("voc07", "continuous")


@dataclass(frozen=True)
class GroundTruthRecord:
    image_id: str
    box: RotatedBox
    category: str
    difficult: bool = False

    def __post_init__(self):
        if not self.image_id:
            raise ValueError("image_id must be non-empty")
        if not self.category:
            raise ValueError("category must be non-empty")


@dataclass(frozen=True)
class DetectionRecord:
    image_id: str
    box: RotatedBox
    category: str
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass
class EvalReport:
    """Per-class AP, dataset mAP, PR curves, and the confusion matrix.

    ``mean_ap`` averages over categories with at least one ground truth;
    categories without ground truth are absent from ``per_class_ap``.
    ``confusion`` is (C+1) x (C+1) with the background row/column last and
    rows indexed by ground-truth class, columns by detection class.
    """

    per_class_ap: dict[str, float]
    mean_ap: float
    pr_curves: dict[str, list[tuple[float, float]]]
    confusion: np.ndarray
    categories: list[str]
    per_class_num_gt: dict[str, int] = field(default_factory=dict)
    per_class_num_det: dict[str, int] = field(default_factory=dict)

    def to_csv(self) -> str:
        """CSV rows ``category,num_gt,num_det,ap`` plus a trailing mAP row.

        Floats are written with full (repr) precision so the values round-trip
        exactly through text.
        """
        lines = ["category,num_gt,num_det,ap"]
        for cat in sorted(self.per_class_ap):
            lines.append(
                f"{cat},{self.per_class_num_gt.get(cat, 0)},"
                f"{self.per_class_num_det.get(cat, 0)},{self.per_class_ap[cat]!r}"
            )
        total_gt = sum(self.per_class_num_gt.values())
        total_det = sum(self.per_class_num_det.values())
        lines.append(f"mAP,{total_gt},{total_det},{self.mean_ap!r}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "mean_ap": self.mean_ap,
            "per_class": {
                cat: {
                    "ap": self.per_class_ap[cat],
                    "num_gt": self.per_class_num_gt.get(cat, 0),
                    "num_det": self.per_class_num_det.get(cat, 0),
                }
                for cat in sorted(self.per_class_ap)
            },
            "pr_curves": {
                cat: [[r, p] for r, p in pts] for cat, pts in sorted(self.pr_curves.items())
            },
            "categories": self.categories,
            "confusion": self.confusion.tolist(),
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def match_detections(
    dets: list[DetectionRecord],
    gts: list[GroundTruthRecord],
    iou_thr: float = 0.5,
) -> tuple[list[str | None], list[bool]]:
    """Greedy one-to-one matching within a single (image, category) group.

    Detections are processed by descending score (ties by input order); each
    is a TP when its best-IoU still-available ground truth reaches
    ``iou_thr``, otherwise an FP.  A matched ground truth becomes unavailable,
    except difficult ones, which absorb any number of detections; detections
    matching a difficult ground truth get the label ``None`` (ignored).

    Returns:
        (labels, gt_matched): labels aligned with ``dets`` holding "tp", "fp"
        or None; flags aligned with ``gts``.
    """
    keys = {(r.image_id, r.category) for r in dets} | {(r.image_id, r.category) for r in gts}
    if len(keys) > 1:
        raise MixedImageOrCategory(f"records span multiple (image, category) groups: {sorted(keys)}")

    labels: list[str | None] = [None] * len(dets)
    gt_matched = [False] * len(gts)
    if not dets:
        return labels, gt_matched
    ious = iou_matrix([d.box for d in dets], [g.box for g in gts]) if gts else None
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    for i in order:
        best_j, best_iou = -1, -1.0
        for j, gt in enumerate(gts):
            if gt_matched[j] and not gt.difficult:
                continue
            if ious[i, j] > best_iou:
                best_j, best_iou = j, ious[i, j]
        if best_j >= 0 and best_iou >= iou_thr:
            gt_matched[best_j] = True
            labels[i] = None if gts[best_j].difficult else TP
        else:
            labels[i] = FP
    return labels, gt_matched


def average_precision(labels, num_gt: int, mode: str = "voc07"):
    """AP from a score-ordered TP/FP label sequence.

    ``voc07`` is the 11-point interpolation (mean over recall thresholds
    0.0, 0.1, ..., 1.0 of the max precision at recall >= t); ``continuous``
    is the area under the monotone-envelope PR curve.  Returns None when
    ``num_gt`` is 0 (AP undefined; excluded from mAP).
    """
    if mode not in AP_MODES:
        raise ValueError(f"mode must be one of {AP_MODES}, got {mode!r}")
    if num_gt < 0:
        raise ValueError(f"num_gt must be >= 0, got {num_gt}")
    if num_gt == 0:
        return None
    recall, precision = pr_curve(labels, num_gt)
    if len(recall) == 0:
        return 0.0
    if mode == "voc07":
        total = 0.0
        for i in range(11):
            t = i / 10
            at_least = precision[recall >= t]
            total += float(at_least.max()) if at_least.size else 0.0
        return total / 11
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    changed = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(((mrec[changed + 1] - mrec[changed]) * mpre[changed + 1]).sum())


def pr_curve(labels, num_gt: int) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative (recall, precision) arrays for a score-ordered label sequence."""
    flags = np.array([lab == TP for lab in labels], dtype=float)
    tp = np.cumsum(flags)
    ranks = np.arange(1, len(flags) + 1)
    recall = tp / num_gt if num_gt > 0 else np.zeros_like(tp)
    precision = tp / ranks
    return recall, precision


def evaluate(
    dets: list[DetectionRecord],
    gts: list[GroundTruthRecord],
    iou_thr: float = 0.5,
    mode: str = "voc07",
    score_thr: float = 0.0,
    categories: list[str] | None = None,
) -> EvalReport:
    """Full dataset evaluation.

    Matching runs per (image, category); per-category TP/FP labels are then
    merged by descending score (ties by detection input order) before AP is
    computed.  ``score_thr`` and ``categories`` only affect the embedded
    confusion matrix.
    """
    det_groups: dict[tuple[str, str], list[tuple[int, DetectionRecord]]] = defaultdict(list)
    for idx, det in enumerate(dets):
        det_groups[(det.image_id, det.category)].append((idx, det))
    gt_groups: dict[tuple[str, str], list[GroundTruthRecord]] = defaultdict(list)
    for gt in gts:
        gt_groups[(gt.image_id, gt.category)].append(gt)

    cats_with_gt = sorted({g.category for g in gts})
    per_class_ap: dict[str, float] = {}
    pr_curves: dict[str, list[tuple[float, float]]] = {}
    num_gt_by_cat: dict[str, int] = {}
    num_det_by_cat: dict[str, int] = defaultdict(int)
    for det in dets:
        num_det_by_cat[det.category] += 1

    for cat in cats_with_gt:
        images = sorted(
            {img for img, c in det_groups if c == cat} | {img for img, c in gt_groups if c == cat}
        )
        entries: list[tuple[float, int, str]] = []
        num_gt = 0
        for img in images:
            pairs = det_groups.get((img, cat), [])
            group_gts = gt_groups.get((img, cat), [])
            labels, _ = match_detections([d for _, d in pairs], group_gts, iou_thr)
            num_gt += sum(1 for g in group_gts if not g.difficult)
            for (idx, det), lab in zip(pairs, labels):
                if lab is not None:
                    entries.append((det.score, idx, lab))
        entries.sort(key=lambda e: (-e[0], e[1]))
        ordered = [lab for _, _, lab in entries]
        num_gt_by_cat[cat] = num_gt
        ap = average_precision(ordered, num_gt, mode)
        if ap is not None:
            per_class_ap[cat] = ap
            recall, precision = pr_curve(ordered, num_gt)
            pr_curves[cat] = list(zip(recall.tolist(), precision.tolist()))

    mean_ap = float(np.mean(list(per_class_ap.values()))) if per_class_ap else 0.0
    conf_cats = list(categories) if categories is not None else sorted(
        {g.category for g in gts} | {d.category for d in dets}
    )
    confusion = confusion_matrix(dets, gts, iou_thr, score_thr, conf_cats)
    return EvalReport(
        per_class_ap=per_class_ap,
        mean_ap=mean_ap,
        pr_curves=pr_curves,
        confusion=confusion,
        categories=conf_cats,
        per_class_num_gt=num_gt_by_cat,
        per_class_num_det={c: num_det_by_cat.get(c, 0) for c in cats_with_gt},
    )


def confusion_matrix(
    dets: list[DetectionRecord],
    gts: list[GroundTruthRecord],
    iou_thr: float = 0.5,
    score_thr: float = 0.0,
    categories: list[str] | None = None,
) -> np.ndarray:
    """Class-agnostic greedy confusion matrix, shape (C+1, C+1).

    Detections with score >= ``score_thr`` are matched to ground truths per
    image by descending IoU (ties by ground-truth, then detection input
    order); every matched pair increments cell (gt_class, det_class).
    Unmatched ground truths land in the background column, unmatched
    detections in the background row.

    Raises:
        UnknownCategory: if a record's category is outside ``categories``.
    """
    cats = list(categories) if categories is not None else sorted(
        {g.category for g in gts} | {d.category for d in dets}
    )
    index = {c: i for i, c in enumerate(cats)}
    for rec in (*gts, *dets):
        if rec.category not in index:
            raise UnknownCategory(f"category {rec.category!r} not in declared list {cats}")
    background = len(cats)
    counts = np.zeros((len(cats) + 1, len(cats) + 1), dtype=int)

    images = sorted({g.image_id for g in gts} | {d.image_id for d in dets})
    for img in images:
        img_dets = [d for d in dets if d.image_id == img and d.score >= score_thr]
        img_gts = [g for g in gts if g.image_id == img]
        ious = iou_matrix([d.box for d in img_dets], [g.box for g in img_gts])
        candidates = [
            (ious[i, j], j, i)
            for i in range(len(img_dets))
            for j in range(len(img_gts))
            if ious[i, j] >= iou_thr
        ]
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        det_used = [False] * len(img_dets)
        gt_used = [False] * len(img_gts)
        for _, j, i in candidates:
            if det_used[i] or gt_used[j]:
                continue
            det_used[i] = gt_used[j] = True
            counts[index[img_gts[j].category], index[img_dets[i].category]] += 1
        for j, g in enumerate(img_gts):
            if not gt_used[j]:
                counts[index[g.category], background] += 1
        for i, d in enumerate(img_dets):
            if not det_used[i]:
                counts[background, index[d.category]] += 1
    return counts
