import numpy as np
import pytest

from racdet import (
    BBox,
    ClassifiedDetection,
    EvalConfig,
    GroundTruth,
    Manifest,
    average_precision,
    evaluate,
    format_report_table,
    iou,
    match_detections,
)

from oracles import ref_evaluate

MANIFEST = Manifest(dim=4, classes=("a", "b"))
LABEL_A = MANIFEST.label_for("a")
LABEL_B = MANIFEST.label_for("b")


def _det(image_id, box, label, score):
    return ClassifiedDetection(image_id, box, label, score, "m", ("ctx",))


class TestIoU:
    def test_identity(self):
        box = BBox(3, 4, 10, 12)
        assert iou(box, box) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 1, 1), BBox(5, 5, 6, 6)) == 0.0

    def test_hand_computed_overlap(self):
        # inter = 5*5 = 25, union = 100 + 100 - 25 = 175
        value = iou(BBox(0, 0, 10, 10), BBox(5, 5, 15, 15))
        assert value == pytest.approx(25 / 175, abs=1e-6)

    def test_touching_edges_are_disjoint(self):
        assert iou(BBox(0, 0, 1, 1), BBox(1, 0, 2, 1)) == 0.0

    def test_symmetric(self, rng):
        for _ in range(100):
            x0, y0, x1, y1 = rng.uniform(0, 50, size=4)
            a = BBox(min(x0, x1), min(y0, y1), max(x0, x1) + 1, max(y0, y1) + 1)
            u0, v0, u1, v1 = rng.uniform(0, 50, size=4)
            b = BBox(min(u0, u1), min(v0, v1), max(u0, u1) + 1, max(v0, v1) + 1)
            assert iou(a, b) == iou(b, a)
            assert 0.0 <= iou(a, b) <= 1.0


class TestMatchDetections:
    def test_exact_hit(self):
        gt = BBox(0, 0, 10, 10)
        flags = match_detections([_det("i", gt, LABEL_A, 0.9)], [gt], 0.5)
        assert flags.tolist() == [True]

    def test_two_detections_one_gt(self):
        gt = BBox(0, 0, 10, 10)
        dets = [
            _det("i", BBox(0, 0, 10, 10), LABEL_A, 0.6),
            _det("i", BBox(0.5, 0.5, 10, 10), LABEL_A, 0.9),
        ]
        flags = match_detections(dets, [gt], 0.5)
        # the higher-scored detection wins the single ground truth
        assert flags.tolist() == [False, True]

    def test_low_iou_is_fp(self):
        flags = match_detections(
            [_det("i", BBox(0, 0, 10, 10), LABEL_A, 0.9)], [BBox(6, 6, 16, 16)], 0.5
        )
        assert flags.tolist() == [False]

    def test_mixed_images_rejected(self):
        dets = [
            _det("i1", BBox(0, 0, 1, 1), LABEL_A, 0.5),
            _det("i2", BBox(0, 0, 1, 1), LABEL_A, 0.5),
        ]
        with pytest.raises(ValueError, match="single image"):
            match_detections(dets, [], 0.5)


class TestAveragePrecision:
    def test_perfect_detector(self):
        assert average_precision([True, True, True], [0.9, 0.8, 0.7], 3) == 1.0

    def test_zero_detections(self):
        assert average_precision([], [], 5) == 0.0

    def test_hand_derived_fixture(self):
        # PR points (recall, precision): (0.5, 1.0), (0.5, 0.5), (1.0, 2/3)
        value = average_precision([True, False, True], [0.9, 0.8, 0.7], 2)
        assert value == pytest.approx(0.8383, abs=0.005)
        assert value == pytest.approx(0.8349834983498351, abs=1e-12)

    def test_all_false_positives(self):
        assert average_precision([False, False], [0.9, 0.8], 2) == 0.0

    def test_num_gt_must_be_positive(self):
        with pytest.raises(ValueError, match="num_gt"):
            average_precision([True], [0.9], 0)

    def test_monotone_under_improvement(self, rng):
        # flipping any FP to TP (same scores) never decreases AP
        for _ in range(50):
            m = int(rng.integers(2, 12))
            flags = rng.random(m) < 0.5
            scores = rng.random(m)
            num_gt = int(flags.sum()) + int(rng.integers(1, 4))
            base = average_precision(flags, scores, num_gt)
            fps = np.flatnonzero(~flags)
            if fps.size == 0:
                continue
            improved = flags.copy()
            improved[fps[int(rng.integers(fps.size))]] = True
            if improved.sum() > num_gt:
                continue
            assert average_precision(improved, scores, num_gt) >= base - 1e-12


def _scene(rng, n_classes=2, max_boxes=50):
    """Random detections + ground truth over a handful of images."""
    class_names = [f"c{k}" for k in range(n_classes)]
    manifest = Manifest(dim=4, classes=tuple(class_names))
    images = [f"img{j}" for j in range(int(rng.integers(1, 5)))]
    gts, dets = [], []
    n_gt = int(rng.integers(1, max_boxes // 2))
    for _ in range(n_gt):
        image_id = images[int(rng.integers(len(images)))]
        x0, y0 = rng.uniform(0, 80, size=2)
        w, h = rng.uniform(5, 30, size=2)
        label = manifest.label_for(class_names[int(rng.integers(n_classes))])
        gts.append(GroundTruth(image_id, BBox(x0, y0, x0 + w, y0 + h), label))
    n_det = int(rng.integers(0, max_boxes // 2))
    for _ in range(n_det):
        if gts and rng.random() < 0.6:
            src = gts[int(rng.integers(len(gts)))]
            jitter = rng.uniform(-4, 4, size=4)
            box = BBox(
                max(0.0, src.bbox.x_min + jitter[0]),
                max(0.0, src.bbox.y_min + jitter[1]),
                src.bbox.x_max + abs(jitter[2]),
                src.bbox.y_max + abs(jitter[3]),
            )
            image_id, label = src.image_id, src.label
        else:
            image_id = images[int(rng.integers(len(images)))]
            x0, y0 = rng.uniform(0, 80, size=2)
            w, h = rng.uniform(5, 30, size=2)
            box = BBox(x0, y0, x0 + w, y0 + h)
            label = manifest.label_for(class_names[int(rng.integers(n_classes))])
        dets.append(_det(image_id, box, label, float(rng.random())))
    return manifest, dets, gts


class TestEvaluate:
    def test_perfect_detections(self, rng):
        gts = [
            GroundTruth("i1", BBox(0, 0, 10, 10), LABEL_A),
            GroundTruth("i1", BBox(20, 20, 30, 30), LABEL_B),
            GroundTruth("i2", BBox(5, 5, 9, 9), LABEL_A),
        ]
        dets = [_det(g.image_id, g.bbox, g.label, 1.0) for g in gts]
        report = evaluate(dets, gts, EvalConfig(classes=MANIFEST.classes))
        assert report.mean_ap == 1.0
        assert report.mean_ar == 1.0

    def test_empty_detections(self):
        gts = [GroundTruth("i1", BBox(0, 0, 10, 10), LABEL_A)]
        report = evaluate([], gts, EvalConfig(classes=MANIFEST.classes))
        assert report.mean_ap == 0.0
        assert report.counts["a"].fn == 1

    def test_two_class_fixture_matches_hand_computed_aps(self):
        # class a: flags [TP, FP, TP] over num_gt=2 -> the frozen AP fixture
        # class b: one exact TP over num_gt=1 -> AP 1.0
        gt_a1 = BBox(0, 0, 10, 10)
        gt_a2 = BBox(40, 40, 60, 60)
        gts = [
            GroundTruth("i", gt_a1, LABEL_A),
            GroundTruth("i", gt_a2, LABEL_A),
            GroundTruth("i", BBox(80, 80, 90, 90), LABEL_B),
        ]
        dets = [
            _det("i", gt_a1, LABEL_A, 0.9),
            _det("i", BBox(100, 0, 110, 10), LABEL_A, 0.8),
            _det("i", gt_a2, LABEL_A, 0.7),
            _det("i", BBox(80, 80, 90, 90), LABEL_B, 0.95),
        ]
        report = evaluate(dets, gts, EvalConfig(classes=MANIFEST.classes))
        assert report.per_class_ap["a"] == pytest.approx(0.8349834983498351, abs=1e-12)
        assert report.per_class_ap["b"] == 1.0
        assert report.mean_ap == pytest.approx((0.8349834983498351 + 1.0) / 2, abs=1e-12)

    def test_class_without_gt_excluded_from_means(self):
        gts = [GroundTruth("i", BBox(0, 0, 10, 10), LABEL_A)]
        dets = [
            _det("i", BBox(0, 0, 10, 10), LABEL_A, 0.9),
            _det("i", BBox(20, 20, 30, 30), LABEL_B, 0.9),  # stray detection, no b gt
        ]
        report = evaluate(dets, gts, EvalConfig(classes=MANIFEST.classes))
        assert "b" not in report.per_class_ap
        assert report.mean_ap == 1.0
        assert report.counts["b"].fp == 1

    def test_permutation_invariance(self, rng):
        manifest, dets, gts = _scene(rng)
        cfg = EvalConfig(classes=manifest.classes)
        base = evaluate(dets, gts, cfg)
        for _ in range(5):
            perm = list(rng.permutation(len(dets)))
            report = evaluate([dets[i] for i in perm], gts, cfg)
            assert report.to_json_dict() == base.to_json_dict()

    def test_matches_quadratic_reference_on_random_scenes(self):
        rng = np.random.default_rng(4242)
        for _ in range(40):
            manifest, dets, gts = _scene(rng)
            cfg = EvalConfig(classes=manifest.classes)
            report = evaluate(dets, gts, cfg)
            ref_ap, ref_ar, ref_map, ref_mar = ref_evaluate(
                [(d.image_id, d.bbox.as_tuple(), d.label.name, d.score) for d in dets],
                [(g.image_id, g.bbox.as_tuple(), g.label.name) for g in gts],
                manifest.classes,
            )
            assert set(report.per_class_ap) == set(ref_ap)
            for name, value in ref_ap.items():
                assert report.per_class_ap[name] == pytest.approx(value, abs=1e-9)
            for name, value in ref_ar.items():
                assert report.per_class_ar[name] == pytest.approx(value, abs=1e-9)
            assert report.mean_ap == pytest.approx(ref_map, abs=1e-9)
            assert report.mean_ar == pytest.approx(ref_mar, abs=1e-9)

    def test_max_dets_cap_applies_per_image_and_class(self):
        gts = [GroundTruth("i", BBox(0, 0, 10, 10), LABEL_A)]
        dets = [
            _det("i", BBox(50, 50, 60, 60), LABEL_A, 0.9),  # kept, FP
            _det("i", BBox(0, 0, 10, 10), LABEL_A, 0.5),  # dropped by the cap
        ]
        report = evaluate(dets, gts, EvalConfig(classes=MANIFEST.classes, max_dets_per_image=1))
        assert report.counts["a"].tp == 0
        assert report.counts["a"].fp == 1

    def test_unknown_class_rejected(self):
        stray = Manifest(dim=4, classes=("zz",)).label_for("zz")
        with pytest.raises(ValueError, match="not in class table"):
            evaluate([], [GroundTruth("i", BBox(0, 0, 1, 1), stray)], EvalConfig(classes=MANIFEST.classes))

    def test_report_bounds_and_mean_position(self, rng):
        for _ in range(20):
            manifest, dets, gts = _scene(rng)
            report = evaluate(dets, gts, EvalConfig(classes=manifest.classes))
            values = list(report.per_class_ap.values())
            for v in values + list(report.per_class_ar.values()):
                assert 0.0 <= v <= 1.0
            if values:
                assert min(values) - 1e-12 <= report.mean_ap <= max(values) + 1e-12


class TestReportTable:
    def test_layout(self):
        gts = [GroundTruth("i", BBox(0, 0, 10, 10), LABEL_A)]
        dets = [_det("i", BBox(0, 0, 10, 10), LABEL_A, 1.0)]
        cfg = EvalConfig(classes=MANIFEST.classes)
        table = format_report_table(evaluate(dets, gts, cfg), cfg)
        header, row = table.splitlines()
        assert header.split() == ["mAP", "mAR", "a", "b"]
        assert row.split() == ["1.0000", "1.0000", "1.0000", "-"]
