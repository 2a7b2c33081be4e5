import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from detkit.geometry import Box, iou_value
from detkit.nms import (
    Detection,
    detections_from_csv,
    detections_to_csv,
    greedy_nms,
    nms_bruteforce,
    score,
)


def det(x1, y1, x2, y2, cls=1, p_cls=0.9, p_iou=0.8):
    return Detection(Box(x1, y1, x2, y2), cls, p_cls, p_iou)


def random_detections(rng, n, n_classes=2):
    out = []
    for _ in range(n):
        x1, y1 = rng.uniform(0, 8, 2)
        w, h = rng.uniform(1, 6, 2)
        out.append(
            Detection(
                Box(x1, y1, x1 + w, y1 + h),
                int(rng.integers(1, n_classes + 1)),
                float(rng.uniform(0, 1)),
                float(rng.uniform(0, 1)),
            )
        )
    return out


class TestScore:
    def test_equal_when_p_iou_one(self):
        d = det(0, 0, 1, 1, p_cls=0.7, p_iou=1.0)
        assert score(d, "standard") == score(d, "iou_guided") == 0.7

    def test_guided_products(self):
        assert score(det(0, 0, 1, 1, p_cls=0.95, p_iou=0.3), "iou_guided") == pytest.approx(0.285)
        assert score(det(0, 0, 1, 1, p_cls=0.85, p_iou=0.9), "iou_guided") == pytest.approx(0.765)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            score(det(0, 0, 1, 1), "softnms")

    def test_invalid_probabilities_rejected(self):
        with pytest.raises(ValueError):
            Detection(Box(0, 0, 1, 1), 1, 1.2, 0.5)


class TestGreedy:
    def test_single_detection_kept(self):
        d = det(0, 0, 4, 4)
        assert greedy_nms([d]) == [d]

    def test_empty_input(self):
        assert greedy_nms([]) == []

    def test_identical_boxes_keep_higher_score(self):
        a = det(0, 0, 4, 4, p_cls=0.9)
        b = det(0, 0, 4, 4, p_cls=0.8)
        assert greedy_nms([b, a]) == [a]

    def test_survivor_flips_with_mode(self):
        # overlapping pair with IOU 0.7: confident bad box vs better box
        a = det(0, 0, 10, 10, p_cls=0.95, p_iou=0.3)
        b = det(0, 0, 7, 10, p_cls=0.85, p_iou=0.9)
        assert iou_value(a.box, b.box) == pytest.approx(0.7, abs=1e-12)
        assert greedy_nms([a, b], 0.5, "standard") == [a]
        assert greedy_nms([a, b], 0.5, "iou_guided") == [b]

    def test_different_classes_do_not_suppress(self):
        a = det(0, 0, 4, 4, cls=1, p_cls=0.9)
        b = det(0, 0, 4, 4, cls=2, p_cls=0.8)
        assert greedy_nms([a, b]) == [a, b]

    def test_score_floor_drops_noise(self):
        a = det(0, 0, 4, 4, p_cls=0.9)
        b = det(20, 20, 24, 24, p_cls=0.005)
        assert greedy_nms([a, b]) == [a]

    def test_suppression_is_strict_inequality(self):
        # IOU exactly at the threshold survives
        a = det(0, 0, 10, 10, p_cls=0.9)
        b = det(0, 0, 5, 10, p_cls=0.8)  # IOU 0.5
        assert greedy_nms([a, b], 0.5) == [a, b]

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            greedy_nms([], 1.0)

    @given(st.integers(0, 2**32 - 1), st.sampled_from([0.3, 0.5, 0.7]), st.sampled_from(["standard", "iou_guided"]))
    @settings(max_examples=150, deadline=None)
    def test_kept_set_is_antichain(self, seed, thr, mode):
        rng = np.random.default_rng(seed)
        kept = greedy_nms(random_detections(rng, 8), thr, mode)
        for i, a in enumerate(kept):
            for b in kept[i + 1 :]:
                if a.class_id == b.class_id:
                    assert iou_value(a.box, b.box) <= thr

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_uniform_p_iou_reduces_to_standard(self, seed):
        rng = np.random.default_rng(seed)
        dets = [
            Detection(d.box, d.class_id, d.p_cls, 0.6) for d in random_detections(rng, 8)
        ]
        # uniform positive attenuation rescales all scores: same argsort
        kept_std = greedy_nms(dets, 0.5, "standard", score_floor=0.0)
        kept_gui = greedy_nms(dets, 0.5, "iou_guided", score_floor=0.0)
        assert kept_std == kept_gui


class TestOracle:
    def test_refuses_large_instances(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            nms_bruteforce(random_detections(rng, 13))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=200, deadline=None)
    def test_matches_greedy(self, seed):
        rng = np.random.default_rng(seed)
        dets = random_detections(rng, int(rng.integers(0, 11)))
        for mode in ("standard", "iou_guided"):
            for thr in (0.3, 0.5, 0.7):
                assert greedy_nms(dets, thr, mode) == nms_bruteforce(dets, thr, mode)

    def test_score_flip_pair_matches(self):
        a = det(0, 0, 10, 10, p_cls=0.95, p_iou=0.3)
        b = det(0, 0, 7, 10, p_cls=0.85, p_iou=0.9)
        for mode in ("standard", "iou_guided"):
            assert greedy_nms([a, b], 0.5, mode) == nms_bruteforce([a, b], 0.5, mode)


class TestCsv:
    def test_roundtrip(self):
        rows = [("img0", det(0, 0, 4, 4)), ("img1", det(1, 1, 3, 5, cls=2, p_cls=0.25, p_iou=0.125))]
        text = detections_to_csv(rows)
        back = detections_from_csv(text)
        assert back == rows

    def test_header_validated(self):
        with pytest.raises(ValueError):
            detections_from_csv("a,b,c\n1,2,3\n")
