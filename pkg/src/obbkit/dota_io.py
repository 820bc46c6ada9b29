"""DOTA-format file I/O and huge-image processing in coordinate space:
annotation parsing, Task1 result files, sliding-window split planning,
annotation clipping, and patch-result merging.

Only coordinates are handled here; no image pixels are read or written.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from shapely.geometry import Polygon, box as shapely_box

from .errors import InvalidGeometry, ParseError
from .evaluation import DetectionRecord, GroundTruthRecord
from .geometry import AngleConvention, QuadPoly, quad_to_rbox, rbox_to_quad
from .overlap import rotated_nms, scored_boxes

DEFAULT_WINDOW = 1024
DEFAULT_GAP = 200
DEFAULT_KEEP_FRAC = 0.7
DEFAULT_MERGE_NMS_THR = 0.1

_METADATA_PREFIXES = ("imagesource", "gsd")


@dataclass(frozen=True)
class AnnotationRecord:
    quad: QuadPoly
    category: str
    difficult: int = 0


@dataclass
class AnnotationFile:
    image_id: str
    records: list[AnnotationRecord]


@dataclass
class SplitPlan:
    """Sliding-window layout over a (W, H) image: overlapping, border-clamped
    windows of side <= ``window`` whose union covers the image."""

    image_size: tuple[int, int]
    window: int
    gap: int
    windows: list[tuple[int, int, int, int]]


@dataclass
class PatchDetection:
    """Detections of one window, in window-local coordinates."""

    origin: tuple[int, int]
    detections: list[DetectionRecord]


def parse_annotation(text: str, image_id: str, source: str | None = None) -> AnnotationFile:
    """Parse DOTA v1.0 annotation content.

    Data lines read ``x1 y1 x2 y2 x3 y3 x4 y4 category difficult``; blank
    lines and leading ``imagesource``/``gsd`` metadata lines are skipped.

    Raises:
        ParseError: on wrong arity or non-numeric coordinates, with the line number.
    """
    records: list[AnnotationRecord] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.lower().startswith(_METADATA_PREFIXES):
            continue
        parts = line.split()
        if len(parts) != 10:
            raise ParseError(
                f"expected 10 fields (8 coordinates, category, difficult), got {len(parts)}",
                source=source, line=lineno,
            )
        try:
            coords = [float(v) for v in parts[:8]]
        except ValueError as exc:
            raise ParseError(f"non-numeric coordinate: {exc}", source=source, line=lineno)
        if not all(math.isfinite(v) for v in coords):
            raise ParseError("coordinates must be finite", source=source, line=lineno)
        try:
            difficult = int(parts[9])
        except ValueError:
            raise ParseError(f"difficult flag must be 0 or 1, got {parts[9]!r}",
                             source=source, line=lineno)
        quad = QuadPoly(tuple(zip(coords[0::2], coords[1::2])))
        records.append(AnnotationRecord(quad, parts[8], difficult))
    return AnnotationFile(image_id, records)


def read_annotation_file(path: str | Path) -> AnnotationFile:
    path = Path(path)
    return parse_annotation(path.read_text(), path.stem, source=str(path))


def format_annotation(ann: AnnotationFile) -> str:
    lines = []
    for rec in ann.records:
        coords = " ".join(f"{v:.6f}" for xy in rec.quad.vertices for v in xy)
        lines.append(f"{coords} {rec.category} {rec.difficult}")
    return "\n".join(lines) + ("\n" if lines else "")


def write_results(dets: Sequence[DetectionRecord], out_dir: str | Path) -> list[Path]:
    """Write DOTA Task1 submission files, one ``Task1_<category>.txt`` per category.

    Lines are ``image_id score x1 y1 x2 y2 x3 y3 x4 y4`` with all floats
    formatted %.6f (round-half-even) for byte-stable output.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_cat: dict[str, list[DetectionRecord]] = {}
    for det in dets:
        by_cat.setdefault(det.category, []).append(det)
    written = []
    for cat in sorted(by_cat):
        path = out_dir / f"Task1_{cat}.txt"
        lines = []
        for det in by_cat[cat]:
            quad = rbox_to_quad(det.box)
            coords = " ".join(f"{v:.6f}" for xy in quad.vertices for v in xy)
            lines.append(f"{det.image_id} {det.score:.6f} {coords}")
        path.write_text("\n".join(lines) + ("\n" if lines else ""))
        written.append(path)
    return written


def parse_results(
    path: str | Path,
    convention: AngleConvention | str = AngleConvention.LE90,
) -> list[DetectionRecord]:
    """Parse Task1 result files back into detection records.

    ``path`` may be a single file or a directory of ``Task1_*.txt`` files;
    the category is taken from the file name.  Unknown categories are parsed
    as-is; vocabulary checks happen downstream.
    """
    path = Path(path)
    files = sorted(path.glob("Task1_*.txt")) if path.is_dir() else [path]
    records: list[DetectionRecord] = []
    for f in files:
        category = f.stem[len("Task1_"):] if f.stem.startswith("Task1_") else f.stem
        for lineno, raw in enumerate(f.read_text().splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 10:
                raise ParseError(f"expected 10 fields (image_id, score, 8 coordinates), "
                                 f"got {len(parts)}", source=str(f), line=lineno)
            try:
                score = float(parts[1])
                coords = [float(v) for v in parts[2:]]
            except ValueError as exc:
                raise ParseError(f"non-numeric field: {exc}", source=str(f), line=lineno)
            quad = QuadPoly(tuple(zip(coords[0::2], coords[1::2])))
            records.append(DetectionRecord(parts[0], quad_to_rbox(quad, convention),
                                           category, score))
    return records


def annotation_to_ground_truth(
    ann: AnnotationFile,
    convention: AngleConvention | str = AngleConvention.LE90,
) -> list[GroundTruthRecord]:
    return [
        GroundTruthRecord(ann.image_id, quad_to_rbox(rec.quad, convention),
                          rec.category, bool(rec.difficult))
        for rec in ann.records
    ]


def _axis_starts(length: int, window: int, gap: int) -> list[int]:
    stride = window - gap
    starts: list[int] = []
    x = 0
    while True:
        if x + window > length:
            x = max(0, length - window)
        if not starts or starts[-1] != x:
            starts.append(x)
        if x + window >= length:
            return starts
        x += stride


def split_plan(width: int, height: int, window: int = DEFAULT_WINDOW,
               gap: int = DEFAULT_GAP) -> SplitPlan:
    """Plan overlapping windows over a W x H image.

    Per axis, starts run at stride ``window - gap`` from 0; a start whose
    window would overrun the border is replaced by max(0, L - window).
    Window extents are clamped to the image, so every pixel is covered and no
    window exceeds the requested size.

    Raises:
        InvalidGeometry: unless 0 <= gap < window and both image sides are positive.
    """
    if not 0 <= gap < window:
        raise InvalidGeometry(f"need 0 <= gap < window, got gap={gap}, window={window}")
    if width <= 0 or height <= 0:
        raise InvalidGeometry(f"image sides must be positive, got {width}x{height}")
    xs = _axis_starts(width, window, gap)
    ys = _axis_starts(height, window, gap)
    windows = [
        (x0, y0, min(x0 + window, width), min(y0 + window, height))
        for y0 in ys
        for x0 in xs
    ]
    return SplitPlan((width, height), window, gap, windows)


def patch_image_id(image_id: str, x0: int, y0: int) -> str:
    """Patch naming used by the split/merge pipeline: ``<id>__<x0>__<y0>``."""
    return f"{image_id}__{x0}__{y0}"


def parse_patch_image_id(pid: str) -> tuple[str, int, int]:
    parts = pid.rsplit("__", 2)
    if len(parts) != 3:
        raise ParseError(f"patch id {pid!r} does not match '<image>__<x0>__<y0>'")
    try:
        return parts[0], int(parts[1]), int(parts[2])
    except ValueError:
        raise ParseError(f"patch id {pid!r} has non-integer window origin")


def _clip_ratio(quad: QuadPoly, window: tuple[int, int, int, int]) -> float:
    """Fraction of the quad's area inside the window."""
    x0, y0, x1, y1 = window
    poly = Polygon(quad.vertices)
    if not poly.is_valid:
        poly = poly.buffer(0)
    if poly.area <= 0.0:
        inside = all(x0 <= x <= x1 and y0 <= y <= y1 for x, y in quad.vertices)
        return 1.0 if inside else 0.0
    return poly.intersection(shapely_box(x0, y0, x1, y1)).area / poly.area


def clip_annotations(ann: AnnotationFile, plan: SplitPlan,
                     keep_frac: float = DEFAULT_KEEP_FRAC) -> list[AnnotationFile]:
    """Distribute annotations over the plan's windows, in window-local coordinates.

    A record enters a window when the fraction r of its area inside the
    window is positive; quads are translated but never geometrically cut, and
    records with 0 < r < ``keep_frac`` are marked difficult.

    Returns one AnnotationFile per window, aligned with ``plan.windows`` and
    named via :func:`patch_image_id`.
    """
    if not 0.0 < keep_frac <= 1.0:
        raise ValueError(f"keep_frac must be in (0, 1], got {keep_frac}")
    out: list[AnnotationFile] = []
    for window in plan.windows:
        x0, y0 = window[0], window[1]
        kept: list[AnnotationRecord] = []
        for rec in ann.records:
            ratio = _clip_ratio(rec.quad, window)
            if ratio <= 0.0:
                continue
            difficult = rec.difficult if ratio >= keep_frac else 1
            kept.append(AnnotationRecord(rec.quad.translated(-x0, -y0),
                                         rec.category, difficult))
        out.append(AnnotationFile(patch_image_id(ann.image_id, x0, y0), kept))
    return out


def merge_results(patches: Iterable[PatchDetection],
                  nms_thr: float = DEFAULT_MERGE_NMS_THR) -> list[DetectionRecord]:
    """Merge per-window detections back into global coordinates.

    Each detection is translated by its window origin, grouped by
    (image, category), deduplicated with rotated NMS, and returned sorted by
    descending score.
    """
    translated: list[DetectionRecord] = []
    for patch in patches:
        x0, y0 = patch.origin
        for det in patch.detections:
            box = replace(det.box, cx=det.box.cx + x0, cy=det.box.cy + y0)
            translated.append(replace(det, box=box))
    groups: dict[tuple[str, str], list[DetectionRecord]] = {}
    for det in translated:
        groups.setdefault((det.image_id, det.category), []).append(det)
    merged: list[DetectionRecord] = []
    for key in sorted(groups):
        group = groups[key]
        keep = rotated_nms(scored_boxes([d.box for d in group],
                                        [d.score for d in group]), nms_thr)
        merged.extend(group[i] for i in keep)
    merged.sort(key=lambda d: (-d.score, d.image_id, d.category))
    return merged


def multi_scale_plans(width: int, height: int, window: int = DEFAULT_WINDOW,
                      gap: int = DEFAULT_GAP,
                      scales: Sequence[float] = (0.5, 1.0, 1.5)) -> dict[float, SplitPlan]:
    """Split plans over rescaled coordinates, one per scale factor (the "MS" protocol).

    Scaling is coordinate arithmetic only; pair with :func:`scale_annotation`.
    """
    return {
        s: split_plan(max(1, round(width * s)), max(1, round(height * s)), window, gap)
        for s in scales
    }


def scale_annotation(ann: AnnotationFile, factor: float) -> AnnotationFile:
    if factor <= 0:
        raise ValueError(f"scale factor must be positive, got {factor}")
    return AnnotationFile(
        ann.image_id,
        [replace(rec, quad=rec.quad.scaled(factor)) for rec in ann.records],
    )
