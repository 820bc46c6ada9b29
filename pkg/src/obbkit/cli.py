"""Command-line surface: convert, iou, nms, dist, eval, confusion, split, merge.

Box CSVs use the header ``cx,cy,w,h,theta,conv`` (scored boxes add a
``score`` column).  Angles are radians unless ``--degrees`` is passed.
Output floats are printed with full repr precision so values round-trip
exactly; repeated runs on identical inputs are byte-identical.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import dota_io
from .errors import ObbkitError
from .evaluation import confusion_matrix, evaluate
from .gaussian_metrics import box_distance
from .geometry import AngleConvention, RotatedBox, convert
from .overlap import iou_matrix, rotated_iou, rotated_nms, scored_boxes

BOX_HEADER = ["cx", "cy", "w", "h", "theta", "conv"]
SCORED_HEADER = BOX_HEADER + ["score"]

_CONV_TAGS = ("oc", "le90", "le135")


class _CliValidation(ObbkitError):
    """Flag/value errors that should exit with status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _CliValidation(message)


def _read_box_rows(path: str | None, header: list[str], degrees: bool):
    """Parse a box CSV (stdin when path is None); yields (RotatedBox, extras)."""
    stream = sys.stdin if path is None else open(path)
    try:
        lines = [ln.strip() for ln in stream]
    finally:
        if path is not None:
            stream.close()
    lines = [ln for ln in lines if ln]
    source = path or "<stdin>"
    if not lines or [c.strip() for c in lines[0].split(",")] != header:
        raise _CliValidation(f"{source}: first line must be the header {','.join(header)!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = [c.strip() for c in line.split(",")]
        if len(parts) != len(header):
            raise _CliValidation(f"{source}:{lineno}: expected {len(header)} columns, got {len(parts)}")
        conv = parts[5].lower()
        if conv not in _CONV_TAGS:
            raise _CliValidation(f"{source}:{lineno}: conv must be one of {_CONV_TAGS}, got {parts[5]!r}")
        try:
            nums = [float(v) for v in parts[:5]]
            extras = [float(v) for v in parts[6:]]
        except ValueError as exc:
            raise _CliValidation(f"{source}:{lineno}: non-numeric value: {exc}")
        theta = math.radians(nums[4]) if degrees else nums[4]
        rows.append((RotatedBox(nums[0], nums[1], nums[2], nums[3], theta, conv), extras))
    return rows


def _format_box_csv(boxes, degrees: bool) -> str:
    lines = [",".join(BOX_HEADER)]
    for b in boxes:
        theta = math.degrees(b.theta) if degrees else b.theta
        lines.append(f"{b.cx!r},{b.cy!r},{b.w!r},{b.h!r},{theta!r},{b.convention.value}")
    return "\n".join(lines) + "\n"


def _load_ground_truth(gt_dir: str, conv):
    gt_path = Path(gt_dir)
    if not gt_path.is_dir():
        raise FileNotFoundError(f"ground-truth directory not found: {gt_dir}")
    gts = []
    for f in sorted(gt_path.glob("*.txt")):
        gts.extend(dota_io.annotation_to_ground_truth(dota_io.read_annotation_file(f), conv))
    return gts


def _cmd_convert(args) -> int:
    rows = _read_box_rows(args.input, BOX_HEADER, args.degrees)
    if args.src is not None:
        bad = [b for b, _ in rows if b.convention.value != args.src]
        if bad:
            raise _CliValidation(f"--from {args.src} does not match the conv column of {len(bad)} row(s)")
    out = [convert(b, args.to) for b, _ in rows]
    sys.stdout.write(_format_box_csv(out, args.degrees))
    return 0


def _cmd_iou(args) -> int:
    boxes_a = [b for b, _ in _read_box_rows(args.a, BOX_HEADER, args.degrees)]
    boxes_b = [b for b, _ in _read_box_rows(args.b, BOX_HEADER, args.degrees)]
    if args.matrix:
        mat = iou_matrix(boxes_a, boxes_b)
        for row in mat:
            print(",".join(repr(float(v)) for v in row))
        return 0
    if len(boxes_a) != len(boxes_b):
        raise _CliValidation(f"--a has {len(boxes_a)} boxes but --b has {len(boxes_b)}; "
                             "pairs must align (or pass --matrix)")
    for a, b in zip(boxes_a, boxes_b):
        print(repr(rotated_iou(a, b)))
    return 0


def _cmd_nms(args) -> int:
    rows = _read_box_rows(args.input, SCORED_HEADER, args.degrees)
    for b, extras in rows:
        if not 0.0 <= extras[0] <= 1.0:
            raise _CliValidation(f"scores must be in [0, 1], got {extras[0]}")
    dets = scored_boxes([b for b, _ in rows], [extras[0] for _, extras in rows])
    for idx in rotated_nms(dets, args.iou_thr):
        print(idx)
    return 0


def _cmd_dist(args) -> int:
    boxes_a = [b for b, _ in _read_box_rows(args.a, BOX_HEADER, args.degrees)]
    boxes_b = [b for b, _ in _read_box_rows(args.b, BOX_HEADER, args.degrees)]
    if len(boxes_a) != len(boxes_b):
        raise _CliValidation(f"--a has {len(boxes_a)} boxes but --b has {len(boxes_b)}")
    for a, b in zip(boxes_a, boxes_b):
        print(repr(box_distance(a, b, args.kind)))
    return 0


def _cmd_eval(args) -> int:
    gts = _load_ground_truth(args.gt, args.convention)
    dets = dota_io.parse_results(Path(args.det), args.convention)
    report = evaluate(dets, gts, iou_thr=args.iou_thr, mode=args.mode,
                      score_thr=args.score_thr)
    sys.stdout.write(report.to_csv())
    if args.json:
        Path(args.json).write_text(report.to_json())
    return 0


def _cmd_confusion(args) -> int:
    gts = _load_ground_truth(args.gt, args.convention)
    dets = dota_io.parse_results(Path(args.det), args.convention)
    cats = args.categories.split(",") if args.categories else sorted(
        {g.category for g in gts} | {d.category for d in dets}
    )
    counts = confusion_matrix(dets, gts, iou_thr=args.iou_thr,
                              score_thr=args.score_thr, categories=cats)
    labels = cats + ["background"]
    print("gt\\det," + ",".join(labels))
    for label, row in zip(labels, counts):
        print(label + "," + ",".join(str(int(v)) for v in row))
    return 0


def _cmd_split(args) -> int:
    plan = dota_io.split_plan(args.width, args.height, args.window, args.gap)
    print("x0,y0,x1,y1")
    for x0, y0, x1, y1 in plan.windows:
        print(f"{x0},{y0},{x1},{y1}")
    if args.ann:
        if not args.out_dir:
            raise _CliValidation("--out-dir is required when --ann is given")
        ann = dota_io.read_annotation_file(args.ann)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for patch in dota_io.clip_annotations(ann, plan, args.keep_frac):
            (out_dir / f"{patch.image_id}.txt").write_text(dota_io.format_annotation(patch))
    return 0


def _cmd_merge(args) -> int:
    dets = dota_io.parse_results(Path(args.det), args.convention)
    by_origin: dict[tuple[str, int, int], list] = {}
    for det in dets:
        image_id, x0, y0 = dota_io.parse_patch_image_id(det.image_id)
        local = type(det)(image_id, det.box, det.category, det.score)
        by_origin.setdefault((image_id, x0, y0), []).append(local)
    patches = [dota_io.PatchDetection((x0, y0), group)
               for (_, x0, y0), group in sorted(by_origin.items())]
    merged = dota_io.merge_results(patches, args.nms_thr)
    dota_io.write_results(merged, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="obbkit", description=__doc__,
                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    subparsers = parser.add_subparsers(dest="command", required=True)

    class _Sub:
        def add_parser(self, name, **kwargs):
            kwargs.setdefault("formatter_class", argparse.ArgumentDefaultsHelpFormatter)
            return subparsers.add_parser(name, **kwargs)

    sub = _Sub()

    def add_degrees(p):
        p.add_argument("--degrees", action="store_true",
                       help="read and write angles in degrees instead of radians")

    p = sub.add_parser("convert", help="convert a box CSV between angle conventions")
    p.add_argument("--to", required=True, choices=_CONV_TAGS, help="target convention")
    p.add_argument("--from", dest="src", choices=_CONV_TAGS, default=None,
                   help="expected source convention (validates the conv column)")
    p.add_argument("--in", dest="input", default=None, help="input CSV (default: stdin)")
    add_degrees(p)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("iou", help="rotated IoU of aligned box pairs (or the full matrix)")
    p.add_argument("--a", required=True, help="first box CSV")
    p.add_argument("--b", required=True, help="second box CSV")
    p.add_argument("--matrix", action="store_true", help="emit the full |a| x |b| IoU matrix")
    add_degrees(p)
    p.set_defaults(func=_cmd_iou)

    p = sub.add_parser("nms", help="greedy rotated NMS over a scored box CSV")
    p.add_argument("--in", dest="input", default=None, help="scored box CSV (default: stdin)")
    p.add_argument("--iou-thr", type=float, default=0.5, help="suppression threshold")
    add_degrees(p)
    p.set_defaults(func=_cmd_nms)

    p = sub.add_parser("dist", help="Gaussian box distance of aligned box pairs")
    p.add_argument("--a", required=True, help="first box CSV")
    p.add_argument("--b", required=True, help="second box CSV")
    p.add_argument("--kind", required=True, choices=["gwd", "kld", "kld-sym", "kfiou"],
                   help="distance kind")
    add_degrees(p)
    p.set_defaults(func=_cmd_dist)

    p = sub.add_parser("eval", help="evaluate Task1 results against DOTA annotations")
    p.add_argument("--gt", required=True, help="directory of annotation .txt files")
    p.add_argument("--det", required=True, help="directory of Task1_<category>.txt files")
    p.add_argument("--iou-thr", type=float, default=0.5, help="matching IoU threshold")
    p.add_argument("--mode", choices=["voc07", "continuous"], default="voc07",
                   help="average-precision definition")
    p.add_argument("--score-thr", type=float, default=0.0,
                   help="score threshold for the confusion matrix")
    p.add_argument("--convention", choices=_CONV_TAGS, default="le90",
                   help="convention for boxes recovered from quads")
    p.add_argument("--json", default=None, help="also write the full report as JSON")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("confusion", help="confusion matrix of results vs annotations")
    p.add_argument("--gt", required=True, help="directory of annotation .txt files")
    p.add_argument("--det", required=True, help="directory of Task1_<category>.txt files")
    p.add_argument("--iou-thr", type=float, default=0.5, help="matching IoU threshold")
    p.add_argument("--score-thr", type=float, default=0.0, help="detection score threshold")
    p.add_argument("--categories", default=None,
                   help="comma-separated category list (default: derive from the files)")
    p.add_argument("--convention", choices=_CONV_TAGS, default="le90",
                   help="convention for boxes recovered from quads")
    p.set_defaults(func=_cmd_confusion)

    p = sub.add_parser("split", help="plan sliding windows; optionally clip an annotation file")
    p.add_argument("--width", type=int, required=True, help="image width in px")
    p.add_argument("--height", type=int, required=True, help="image height in px")
    p.add_argument("--window", type=int, default=dota_io.DEFAULT_WINDOW, help="window side")
    p.add_argument("--gap", type=int, default=dota_io.DEFAULT_GAP, help="window overlap")
    p.add_argument("--ann", default=None, help="annotation file to clip into patches")
    p.add_argument("--keep-frac", type=float, default=dota_io.DEFAULT_KEEP_FRAC,
                   help="min kept area fraction before marking difficult")
    p.add_argument("--out-dir", default=None, help="directory for patch annotation files")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("merge", help="merge per-window Task1 results into global results")
    p.add_argument("--det", required=True,
                   help="directory of patch Task1 files (image ids '<id>__<x0>__<y0>')")
    p.add_argument("--out", required=True, help="output directory for merged Task1 files")
    p.add_argument("--nms-thr", type=float, default=dota_io.DEFAULT_MERGE_NMS_THR,
                   help="cross-window duplicate suppression threshold")
    p.add_argument("--convention", choices=_CONV_TAGS, default="le90",
                   help="convention for boxes recovered from quads")
    p.set_defaults(func=_cmd_merge)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        for name in ("iou_thr", "score_thr", "nms_thr"):
            value = getattr(args, name, None)
            if value is not None and not 0.0 <= value <= 1.0:
                raise _CliValidation(f"--{name.replace('_', '-')} must be in [0, 1], got {value}")
        return args.func(args)
    except _CliValidation as exc:
        print(f"obbkit: error: {exc}", file=sys.stderr)
        return 1
    except ObbkitError as exc:
        print(f"obbkit: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"obbkit: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"obbkit: i/o error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
