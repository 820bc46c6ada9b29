import math

import numpy as np
import pytest

from obbkit import (
    AnnotationFile,
    AnnotationRecord,
    DetectionRecord,
    InvalidGeometry,
    ParseError,
    PatchDetection,
    QuadPoly,
    RotatedBox,
    clip_annotations,
    merge_results,
    multi_scale_plans,
    parse_annotation,
    parse_results,
    quad_to_rbox,
    rbox_to_quad,
    rotated_iou,
    scale_annotation,
    split_plan,
    write_results,
)
from obbkit.dota_io import parse_patch_image_id, patch_image_id

from conftest import corner_set_distance, random_boxes


class TestParseAnnotation:
    def test_basic_line(self):
        ann = parse_annotation("100 100 200 100 200 200 100 200 plane 0", "P0001")
        assert ann.image_id == "P0001"
        assert len(ann.records) == 1
        rec = ann.records[0]
        assert rec.category == "plane"
        assert rec.difficult == 0
        assert rec.quad.vertices == ((100, 100), (200, 100), (200, 200), (100, 200))
        assert rec.quad.area == pytest.approx(10000.0)

    def test_metadata_and_blank_lines_skipped(self):
        text = "imagesource:GoogleEarth\ngsd:0.12\n\n0 0 1 0 1 1 0 1 ship 1\n"
        ann = parse_annotation(text, "P0002")
        assert len(ann.records) == 1
        assert ann.records[0].difficult == 1

    def test_empty_file(self):
        assert parse_annotation("", "P0003").records == []

    def test_arity_error_carries_line(self):
        with pytest.raises(ParseError) as err:
            parse_annotation("1 2 3 plane 0", "P0004")
        assert err.value.line == 1

    def test_non_numeric_coordinate(self):
        with pytest.raises(ParseError) as err:
            parse_annotation("0 0 1 0 1 1 0 x plane 0\n", "P0005")
        assert err.value.line == 1


class TestResultsRoundTrip:
    def test_single_detection(self, tmp_path):
        det = DetectionRecord("P0001", RotatedBox(10, 20, 8, 4, 0.3, "le90"), "plane", 0.95)
        paths = write_results([det], tmp_path)
        assert [p.name for p in paths] == ["Task1_plane.txt"]
        line = paths[0].read_text().strip()
        assert line.startswith("P0001 0.950000 ")
        assert len(line.split()) == 10

    def test_round_trip_1000_random(self, tmp_path):
        rng = np.random.default_rng(307)
        boxes = random_boxes(rng, 1000, center_range=800.0, size_range=(2.0, 60.0))
        cats = ["plane", "ship", "harbor"]
        scores = rng.permutation(np.linspace(0.001, 0.999, 1000))
        dets = [
            DetectionRecord(f"P{i % 7:04d}", box, cats[i % 3], float(scores[i]))
            for i, box in enumerate(boxes)
        ]
        write_results(dets, tmp_path)
        parsed = parse_results(tmp_path)
        assert len(parsed) == len(dets)
        key = lambda d: (d.image_id, d.category, d.score)
        for d, p in zip(sorted(dets, key=key), sorted(parsed, key=key)):
            assert (d.image_id, d.category) == (p.image_id, p.category)
            assert abs(p.score - d.score) < 1e-6
            assert corner_set_distance(p.box, d.box) < 1e-5

    def test_unknown_category_file_parsed(self, tmp_path):
        (tmp_path / "Task1_zeppelin.txt").write_text("P0001 0.500000 0 0 1 0 1 1 0 1\n")
        parsed = parse_results(tmp_path)
        assert parsed[0].category == "zeppelin"

    def test_bad_line_reports_file_and_line(self, tmp_path):
        f = tmp_path / "Task1_plane.txt"
        f.write_text("P0001 0.5 1 2 3\n")
        with pytest.raises(ParseError) as err:
            parse_results(tmp_path)
        assert err.value.line == 1
        assert "Task1_plane.txt" in str(err.value)


class TestSplitPlan:
    def test_2048_window_1024_gap_200(self):
        plan = split_plan(2048, 2048, 1024, 200)
        xs = sorted({w[0] for w in plan.windows})
        assert xs == [0, 824, 1024]
        assert len(plan.windows) == 9
        for x0, y0, x1, y1 in plan.windows:
            assert x1 - x0 <= 1024 and y1 - y0 <= 1024
            assert 0 <= x0 and x1 <= 2048 and 0 <= y0 and y1 <= 2048

    def test_image_smaller_than_window(self):
        plan = split_plan(800, 800, 1024, 200)
        assert plan.windows == [(0, 0, 800, 800)]

    def test_coverage_random_sizes(self):
        rng = np.random.default_rng(311)
        for _ in range(50):
            w = int(rng.integers(1, 5000))
            h = int(rng.integers(1, 5000))
            window = int(rng.integers(16, 1200))
            gap = int(rng.integers(0, window))
            plan = split_plan(w, h, window, gap)
            xs = np.zeros(w, dtype=bool)
            ys = np.zeros(h, dtype=bool)
            for x0, y0, x1, y1 in plan.windows:
                xs[x0:x1] = True
                ys[y0:y1] = True
                assert x1 - x0 <= window and y1 - y0 <= window
            assert xs.all() and ys.all()

    def test_invalid_gap(self):
        with pytest.raises(InvalidGeometry):
            split_plan(100, 100, 64, 64)
        with pytest.raises(InvalidGeometry):
            split_plan(100, 100, 64, -1)


class TestClipAnnotations:
    def _ann(self, *records):
        return AnnotationFile("big", list(records))

    def test_inside_object_is_shifted(self):
        quad = rbox_to_quad(RotatedBox(900, 900, 60, 30, 0.4, "le90"))
        plan = split_plan(2048, 2048, 1024, 200)
        patches = clip_annotations(self._ann(AnnotationRecord(quad, "plane", 0)), plan)
        assert len(patches) == len(plan.windows)
        hits = [(win, p) for win, p in zip(plan.windows, patches) if p.records]
        # object at (900, 900) lies inside windows starting at 0 and 824 per axis
        assert len(hits) == 4
        for (x0, y0, _, _), patch in hits:
            rec = patch.records[0]
            assert rec.difficult == 0
            assert corner_set_distance(rec.quad, quad.translated(-x0, -y0)) < 1e-9
            assert patch.image_id == patch_image_id("big", x0, y0)

    def test_straddling_object_marked_difficult(self):
        # centered on the boundary x=1024 of the first window: half in, half out
        quad = rbox_to_quad(RotatedBox(1024, 500, 100, 50, 0.0, "le90"))
        plan = split_plan(2048, 2048, 1024, 200)
        patches = clip_annotations(self._ann(AnnotationRecord(quad, "plane", 0)), plan, keep_frac=0.7)
        flags = {}
        for win, patch in zip(plan.windows, patches):
            for rec in patch.records:
                flags[win[:2]] = rec.difficult
        assert flags[(0, 0)] == 1  # exactly half inside -> below keep_frac
        assert flags[(1024, 0)] == 1
        assert flags[(824, 0)] == 0  # fully inside the middle window

    def test_object_outside_all_but_one_window(self):
        quad = rbox_to_quad(RotatedBox(100, 100, 40, 20, 0.1, "le90"))
        plan = split_plan(2048, 2048, 1024, 200)
        patches = clip_annotations(self._ann(AnnotationRecord(quad, "plane", 0)), plan)
        assert sum(len(p.records) for p in patches) == 1

    def test_keep_frac_validated(self):
        plan = split_plan(100, 100, 64, 10)
        with pytest.raises(ValueError):
            clip_annotations(self._ann(), plan, keep_frac=0.0)

    def test_original_difficult_flag_kept(self):
        quad = rbox_to_quad(RotatedBox(50, 50, 20, 10, 0.0, "le90"))
        plan = split_plan(100, 100, 100, 0)
        patches = clip_annotations(self._ann(AnnotationRecord(quad, "ship", 1)), plan)
        assert patches[0].records[0].difficult == 1


class TestMergeResults:
    def test_duplicate_across_windows_suppressed(self):
        box = RotatedBox(100, 100, 40, 20, 0.2, "le90")
        local_a = RotatedBox(100, 100, 40, 20, 0.2, "le90")
        local_b = RotatedBox(100 - 60, 100, 40, 20, 0.2, "le90")
        patches = [
            PatchDetection((0, 0), [DetectionRecord("img", local_a, "plane", 0.9)]),
            PatchDetection((60, 0), [DetectionRecord("img", local_b, "plane", 0.9)]),
        ]
        merged = merge_results(patches, nms_thr=0.1)
        assert len(merged) == 1
        assert corner_set_distance(merged[0].box, box) < 1e-9

    def test_disjoint_objects_retained_sorted(self):
        patches = [
            PatchDetection((0, 0), [DetectionRecord("img", RotatedBox(10, 10, 8, 4, 0, "le90"), "plane", 0.5)]),
            PatchDetection((500, 0), [DetectionRecord("img", RotatedBox(10, 10, 8, 4, 0, "le90"), "plane", 0.8)]),
        ]
        merged = merge_results(patches, nms_thr=0.1)
        assert [d.score for d in merged] == [0.8, 0.5]
        assert merged[0].box.cx == pytest.approx(510)

    def test_split_detect_merge_round_trip(self):
        rng = np.random.default_rng(313)
        cats = ["plane", "ship"]
        objects = []
        for gx in range(5):
            for gy in range(5):
                box = RotatedBox(
                    200 + gx * 400 + rng.uniform(-40, 40),
                    200 + gy * 400 + rng.uniform(-40, 40),
                    rng.uniform(30, 90),
                    rng.uniform(15, 60),
                    rng.uniform(-math.pi / 2, math.pi / 2),
                    "le90",
                )
                objects.append((box, cats[(gx + gy) % 2]))
        ann = AnnotationFile(
            "big", [AnnotationRecord(rbox_to_quad(b), c, 0) for b, c in objects]
        )
        plan = split_plan(2048, 2048, 1024, 200)
        patches = []
        for patch_ann in clip_annotations(ann, plan, keep_frac=0.7):
            _, x0, y0 = parse_patch_image_id(patch_ann.image_id)
            dets = [
                DetectionRecord("big", quad_to_rbox(rec.quad, "le90"), rec.category, 1.0)
                for rec in patch_ann.records
            ]
            patches.append(PatchDetection((x0, y0), dets))
        merged = merge_results(patches, nms_thr=0.1)
        assert len(merged) == len(objects)
        for box, category in objects:
            candidates = [d for d in merged if d.category == category]
            assert max(rotated_iou(box, d.box) for d in candidates) >= 0.99


class TestPatchIds:
    def test_round_trip(self):
        assert parse_patch_image_id(patch_image_id("P00_1", 824, 0)) == ("P00_1", 824, 0)

    def test_malformed(self):
        with pytest.raises(ParseError):
            parse_patch_image_id("noseparators")
        with pytest.raises(ParseError):
            parse_patch_image_id("img__x__y")


class TestMultiScale:
    def test_plans_per_scale(self):
        plans = multi_scale_plans(2048, 2048, 1024, 200, scales=(0.5, 1.0))
        assert plans[1.0].image_size == (2048, 2048)
        assert plans[0.5].image_size == (1024, 1024)
        assert len(plans[1.0].windows) == 9

    def test_scale_annotation(self):
        quad = QuadPoly(((0, 0), (2, 0), (2, 2), (0, 2)))
        ann = AnnotationFile("img", [AnnotationRecord(quad, "plane", 0)])
        scaled = scale_annotation(ann, 0.5)
        assert scaled.records[0].quad.vertices == ((0, 0), (1, 0), (1, 1), (0, 1))
        with pytest.raises(ValueError):
            scale_annotation(ann, 0.0)
