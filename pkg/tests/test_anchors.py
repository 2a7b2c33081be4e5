import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from detkit.anchors import (
    AnchorLabel,
    FeatureLevelSpec,
    GRIDS_320,
    STRIDES_320,
    DEFAULT_SCALE_RATIOS,
    build_levels,
    generate_default_boxes,
    match_anchors,
    detector_320_levels,
)
from detkit.geometry import Box, iou_value


def small_levels():
    return build_levels((4, 2, 1), (8.0, 16.0, 32.0), (0.2, 0.4, 0.6, 0.8))


class TestLevelSpec:
    def test_paper_scale_list_feeds_six_levels(self):
        levels = detector_320_levels()
        assert len(levels) == 6
        assert [lv.scale_ratio for lv in levels] == list(DEFAULT_SCALE_RATIOS[:6])
        assert [lv.next_scale_ratio for lv in levels] == list(DEFAULT_SCALE_RATIOS[1:])

    def test_bad_specs_rejected(self):
        with pytest.raises(ValueError):
            FeatureLevelSpec(0, 1, 8, 0.1, 0.2)
        with pytest.raises(ValueError):
            FeatureLevelSpec(1, 1, 8, 1.3, 0.2)
        with pytest.raises(ValueError):
            FeatureLevelSpec(1, 1, 8, 0.1, 0.2, aspect_ratios=(1.0, -2.0))


class TestGeneration:
    def test_320_pyramid_anchor_count(self):
        # sum of grid^2 over (40,20,10,5,3,1) times 4 templates = 8540
        anchors = generate_default_boxes(320, detector_320_levels())
        assert len(anchors) == sum(g * g for g in GRIDS_320) * 4

    def test_square_box_side_and_center(self):
        levels = build_levels((40,), (8.0,), (0.06, 0.15))
        anchors = generate_default_boxes(320, levels, clip=False)
        # first cell, first template: aspect 1 at scale 0.06*320 = 19.2
        b = anchors.boxes[0]
        assert (b.cx, b.cy) == (4.0, 4.0)
        assert b.w == pytest.approx(19.2, abs=1e-12)
        assert b.h == pytest.approx(19.2, abs=1e-12)

    def test_extra_square_uses_geometric_mean_scale(self):
        levels = build_levels((1,), (320.0,), (0.87, 1.05))
        anchors = generate_default_boxes(320, levels, clip=False)
        extra = anchors.boxes[3]  # templates: ar 1, 2, 0.5, then the extra square
        want = (0.87 * 1.05) ** 0.5 * 320
        assert extra.w == pytest.approx(want, abs=1e-9)
        assert extra.w == pytest.approx(extra.h, abs=1e-12)

    def test_empty_levels_rejected(self):
        with pytest.raises(ValueError):
            generate_default_boxes(320, [])

    def test_determinism(self):
        a = generate_default_boxes(320, detector_320_levels())
        b = generate_default_boxes(320, detector_320_levels())
        assert a.boxes == b.boxes
        assert a.level_index == b.level_index

    def test_unclipped_coordinate_bounds(self):
        input_size = 320
        anchors = generate_default_boxes(input_size, detector_320_levels(), clip=False)
        levels = detector_320_levels()
        for b, lv in zip(anchors.boxes, anchors.level_index):
            s = max(levels[lv].scale_ratio, levels[lv].next_scale_ratio)
            lo, hi = -s * input_size, (1 + s) * input_size
            assert lo <= b.x1 <= hi and lo <= b.x2 <= hi
            assert lo <= b.y1 <= hi and lo <= b.y2 <= hi

    def test_clipped_boxes_inside_image_and_nondegenerate(self):
        anchors = generate_default_boxes(320, detector_320_levels(), clip=True)
        for b in anchors.boxes:
            assert 0.0 <= b.x1 <= b.x2 <= 320.0
            assert 0.0 <= b.y1 <= b.y2 <= 320.0
            assert b.area > 0.0

    def test_json_export_schema(self):
        anchors = generate_default_boxes(32, small_levels())
        rows = json.loads(anchors.to_json())
        assert len(rows) == len(anchors)
        x1, y1, x2, y2, level, cell, template = rows[0]
        assert [level, cell, template] == [0, 0, 0]
        assert rows[0][:4] == list(anchors.boxes[0].as_tuple())


class TestMatching:
    def test_identity_anchor_positive(self):
        anchors = generate_default_boxes(32, small_levels())
        gt = anchors.boxes[5]
        res = match_anchors(anchors, [gt])
        assert res.labels[5] is AnchorLabel.POSITIVE
        assert res.best_iou[5] == 1.0

    def test_all_disjoint_all_negative(self):
        anchors = generate_default_boxes(32, small_levels())
        res = match_anchors(anchors, [Box(1000, 1000, 1010, 1010)])
        assert all(lab is AnchorLabel.NEGATIVE for lab in res.labels)

    def test_empty_gts_all_negative(self):
        anchors = generate_default_boxes(32, small_levels())
        res = match_anchors(anchors, [])
        assert all(lab is AnchorLabel.NEGATIVE for lab in res.labels)
        assert res.best_iou == [0.0] * len(anchors)

    def test_threshold_is_strict_inequality(self):
        anchors = generate_default_boxes(32, small_levels())
        # nested box covering 45% of anchor 0: IOU exactly 0.45, in the band
        # admitted as positive here and only later gated by the loss
        a0 = anchors.boxes[0]
        gt = Box(a0.x1, a0.y1, a0.x1 + 0.45 * a0.w, a0.y2)
        res = match_anchors(anchors, [gt], pos_threshold=0.4)
        assert res.best_iou[0] == pytest.approx(0.45, abs=1e-12)
        assert res.labels[0] is AnchorLabel.POSITIVE
        for a, lab in enumerate(res.labels):
            if res.best_iou[a] > 0.4:
                assert lab is AnchorLabel.POSITIVE

    def test_best_match_guarantee(self):
        anchors = generate_default_boxes(32, small_levels())
        # a sliver overlapping only slightly: below threshold everywhere
        gt = Box(0.0, 0.0, 2.0, 2.0)
        res = match_anchors(anchors, [gt])
        ious = [iou_value(b, gt) for b in anchors.boxes]
        best = max(range(len(ious)), key=lambda i: (ious[i], -i))
        assert max(ious) < 0.4
        assert res.labels[best] is AnchorLabel.POSITIVE
        assert res.gt_index[best] == 0

    def test_recorded_iou_matches_geometry(self):
        anchors = generate_default_boxes(32, small_levels())
        gts = [Box(3.0, 4.0, 14.0, 13.0), Box(10.0, 10.0, 30.0, 28.0)]
        res = match_anchors(anchors, gts)
        for a in range(len(anchors)):
            want = max(iou_value(anchors.boxes[a], g) for g in gts)
            assert res.best_iou[a] == pytest.approx(want, abs=1e-14)

    def test_determinism(self):
        anchors = generate_default_boxes(32, small_levels())
        gts = [Box(3.0, 4.0, 14.0, 13.0)]
        r1 = match_anchors(anchors, gts)
        r2 = match_anchors(anchors, gts)
        assert r1.labels == r2.labels and r1.gt_index == r2.gt_index

    def test_bad_threshold_rejected(self):
        anchors = generate_default_boxes(32, small_levels())
        with pytest.raises(ValueError):
            match_anchors(anchors, [], pos_threshold=1.5)
