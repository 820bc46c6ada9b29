"""Regenerate the 3-image evaluation fixture.

The layout is chosen so every matching decision is unambiguous (IoUs are
either ~1 or ~0, never near the 0.5 threshold) and the per-class APs come out
as simple rationals:

  plane        TP FP TP FP over 3 ground truths  -> AP = 6/11
  ship         perfect detections                -> AP = 1
  storage-tank TP FP over 2 ground truths        -> AP = 6/11

mAP = (6/11 + 1 + 6/11) / 3 = 23/33.  One difficult plane ground truth
absorbs a detection (ignored), and one plane detection duplicates an already
matched ground truth (FP).
"""

from pathlib import Path

from obbkit import DetectionRecord, RotatedBox, rbox_to_quad, write_results

HERE = Path(__file__).parent

GT = {
    "P0001": [
        ((100, 100, 60, 30, 0.3), "plane", 0),
        ((300, 100, 80, 40, -0.5), "plane", 0),
        ((500, 400, 50, 25, 1.0), "plane", 1),  # difficult
    ],
    "P0002": [
        ((150, 200, 70, 35, 0.0), "plane", 0),
        ((400, 300, 90, 30, 0.7), "ship", 0),
        ((100, 450, 60, 20, -0.9), "ship", 0),
    ],
    "P0003": [
        ((250, 250, 100, 40, 1.2), "ship", 0),
        ((400, 100, 30, 30, 0.0), "storage-tank", 0),
        ((450, 100, 30, 30, 0.0), "storage-tank", 0),
    ],
}

DETS = [
    # plane: TP, duplicate FP, TP, ignored (difficult), far-away FP
    ("P0001", (100, 100, 60, 30, 0.3), "plane", 0.95),
    ("P0001", (101, 101, 60, 30, 0.3), "plane", 0.90),
    ("P0002", (150, 200, 70, 35, 0.0), "plane", 0.85),
    ("P0001", (500, 400, 50, 25, 1.0), "plane", 0.80),
    ("P0002", (600, 600, 40, 20, 0.2), "plane", 0.70),
    # ship: perfect
    ("P0002", (400, 300, 90, 30, 0.7), "ship", 0.90),
    ("P0003", (250, 250, 100, 40, 1.2), "ship", 0.80),
    ("P0002", (100, 450, 60, 20, -0.9), "ship", 0.75),
    # storage-tank: TP then FP
    ("P0003", (400, 100, 30, 30, 0.0), "storage-tank", 0.60),
    ("P0003", (100, 100, 30, 30, 0.0), "storage-tank", 0.50),
]


def main():
    gt_dir = HERE / "gt"
    det_dir = HERE / "det"
    gt_dir.mkdir(exist_ok=True)
    det_dir.mkdir(exist_ok=True)
    for image_id, objects in GT.items():
        lines = ["imagesource:synthetic", "gsd:0.5"]
        for geom, category, difficult in objects:
            quad = rbox_to_quad(RotatedBox(*geom, "le90"))
            coords = " ".join(f"{v:.6f}" for xy in quad.vertices for v in xy)
            lines.append(f"{coords} {category} {difficult}")
        (gt_dir / f"{image_id}.txt").write_text("\n".join(lines) + "\n")
    records = [
        DetectionRecord(image_id, RotatedBox(*geom, "le90"), category, score)
        for image_id, geom, category, score in DETS
    ]
    write_results(records, det_dir)
    print(f"fixture written under {HERE}")


if __name__ == "__main__":
    main()
