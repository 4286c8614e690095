"""Box arithmetic fixtures and randomized geometry properties."""

import numpy as np
import pytest

from freedet.core import BoundingBox, Detection, LabelCandidate
from freedet.errors import ValidationError
from freedet.geometry import convert_box, giou, iou, iou_matrix, nms

TOL = 1e-9


def det(image_id, x, y, w, h, score):
    return Detection(
        image_id=image_id,
        box=BoundingBox(x, y, w, h),
        score=score,
        candidates=(LabelCandidate("thing", -0.1),),
    )


def random_boxes(rng, n):
    xy = rng.uniform(-50, 50, size=(n, 2))
    wh = rng.uniform(0.5, 40, size=(n, 2))
    return [BoundingBox(x, y, w, h) for (x, y), (w, h) in zip(xy, wh)]


class TestConvertBox:
    def test_origin_anchored_round_trip(self):
        assert convert_box(convert_box([0, 0, 10, 10], "xywh", "xyxy"), "xyxy", "xywh") == (
            0, 0, 10, 10,
        )

    def test_center_form(self):
        assert convert_box([5, 5, 10, 20], "xywh", "cxcywh") == (10, 15, 10, 20)

    def test_degenerate_xyxy_rejected(self):
        with pytest.raises(ValidationError, match="degenerate"):
            convert_box([3, 3, 1, 1], "xyxy", "xywh")

    def test_round_trip_random(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            x, y = rng.uniform(-100, 100, 2)
            w, h = rng.uniform(0.1, 50, 2)
            for a in ("xywh", "xyxy", "cxcywh"):
                src = convert_box([x, y, w, h], "xywh", a)
                for b in ("xywh", "xyxy", "cxcywh"):
                    back = convert_box(convert_box(src, a, b), b, a)
                    assert np.allclose(back, src, atol=1e-9)


class TestIoU:
    def test_identity(self):
        box = BoundingBox(0, 0, 10, 10)
        assert iou(box, box) == 1.0

    def test_corner_touching(self):
        assert iou(BoundingBox(0, 0, 10, 10), BoundingBox(10, 10, 10, 10)) == 0.0

    def test_half_overlap(self):
        # intersection 50, union 150, by hand
        value = iou(BoundingBox(0, 0, 10, 10), BoundingBox(5, 0, 10, 10))
        assert abs(value - 1 / 3) < TOL


class TestGIoU:
    def test_identity(self):
        box = BoundingBox(0, 0, 10, 10)
        assert giou(box, box) == 1.0

    def test_disjoint(self):
        # IoU 0, union 200, enclosing 300: 0 - (300-200)/300
        value = giou(BoundingBox(0, 0, 10, 10), BoundingBox(20, 0, 10, 10))
        assert abs(value - (-1 / 3)) < TOL

    def test_hull_equals_union(self):
        # enclosing box equals the union region, so giou == iou
        value = giou(BoundingBox(0, 0, 10, 10), BoundingBox(5, 0, 10, 10))
        assert abs(value - 1 / 3) < TOL


class TestRandomizedProperties:
    def test_symmetry_translation_and_bounds(self):
        rng = np.random.default_rng(42)
        n = 10_000
        boxes_a = random_boxes(rng, n)
        boxes_b = random_boxes(rng, n)
        shift = rng.uniform(-100, 100, size=2)
        for a, b in zip(boxes_a, boxes_b):
            i_ab = iou(a, b)
            g_ab = giou(a, b)
            assert iou(b, a) == i_ab
            assert giou(b, a) == g_ab
            assert 0.0 <= i_ab <= 1.0
            assert -1.0 < g_ab <= 1.0
            assert g_ab <= i_ab + TOL
            a2 = BoundingBox(a.x + shift[0], a.y + shift[1], a.w, a.h)
            b2 = BoundingBox(b.x + shift[0], b.y + shift[1], b.w, b.h)
            assert abs(iou(a2, b2) - i_ab) < 1e-9
            assert abs(giou(a2, b2) - g_ab) < 1e-9

    def test_matrix_agrees_with_scalar(self):
        rng = np.random.default_rng(3)
        boxes_a = random_boxes(rng, 40)
        boxes_b = random_boxes(rng, 30)
        mat = iou_matrix(boxes_a, boxes_b)
        assert mat.shape == (40, 30)
        for i in (0, 7, 39):
            for j in (0, 11, 29):
                assert mat[i, j] == iou(boxes_a[i], boxes_b[j])


class TestNMS:
    def test_singleton(self):
        d = det("img", 0, 0, 10, 10, 0.9)
        assert nms([d], 0.5) == [d]

    def test_identical_boxes_suppressed(self):
        keep = det("img", 0, 0, 10, 10, 0.9)
        drop = det("img", 0, 0, 10, 10, 0.8)
        assert nms([drop, keep], 0.5) == [keep]

    def test_disjoint_boxes_survive(self):
        d1 = det("img", 0, 0, 10, 10, 0.9)
        d2 = det("img", 50, 50, 10, 10, 0.8)
        assert nms([d1, d2], 0.5) == [d1, d2]

    def test_cross_image_boxes_never_suppress(self):
        d1 = det("a", 0, 0, 10, 10, 0.9)
        d2 = det("b", 0, 0, 10, 10, 0.8)
        assert nms([d1, d2], 0.5) == [d1, d2]

    def test_threshold_is_strict(self):
        # suppression requires IoU strictly above the threshold
        d1 = det("img", 0, 0, 10, 10, 0.9)
        d2 = det("img", 5, 0, 10, 10, 0.8)
        exact = iou(d1.box, d2.box)  # 1/3
        assert nms([d1, d2], exact) == [d1, d2]
        assert nms([d1, d2], exact - 1e-12) == [d1]

    def _random_dets(self, rng, n, images=2):
        out = []
        for _ in range(n):
            x, y = rng.uniform(0, 50, 2)
            w, h = rng.uniform(5, 30, 2)
            out.append(
                det(int(rng.integers(0, images)), x, y, w, h, float(rng.uniform(0, 1)))
            )
        return out

    def test_idempotent(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            dets = self._random_dets(rng, 25)
            thr = float(rng.uniform(0.1, 0.9))
            once = nms(dets, thr)
            assert nms(once, thr) == once

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            dets = self._random_dets(rng, 25)
            t1, t2 = sorted(rng.uniform(0, 1, size=2))
            assert len(nms(dets, t1)) <= len(nms(dets, t2))

    def test_no_retained_pair_overlaps(self):
        rng = np.random.default_rng(13)
        dets = self._random_dets(rng, 40, images=1)
        thr = 0.3
        kept = nms(dets, thr)
        for i, a in enumerate(kept):
            for b in kept[i + 1 :]:
                assert iou(a.box, b.box) <= thr

    def test_output_score_sorted(self):
        rng = np.random.default_rng(14)
        dets = self._random_dets(rng, 40)
        kept = nms(dets, 0.4)
        scores = [d.score for d in kept]
        assert scores == sorted(scores, reverse=True)
