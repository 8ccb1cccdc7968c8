import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logoforge.datamodel import Annotation, BBox, Category, Dataset, Detection, ImageInfo
from logoforge.evaluation import (
    COCO_THRESHOLDS, RECALL_GRID, average_precision, evaluate, match_detections,
)

from helpers import naive_ap, naive_map, noisy_detections, random_dataset


def gt_dataset(boxes_per_image, n_cats=2):
    images = [ImageInfo(i + 1, f"{i + 1}.png", 100, 100) for i in range(len(boxes_per_image))]
    anns = []
    for i, boxes in enumerate(boxes_per_image):
        for cat, box in boxes:
            anns.append(Annotation(len(anns) + 1, i + 1, cat, BBox(*box)))
    return Dataset(images, anns, [Category(c, f"k{c}") for c in range(1, n_cats + 1)])


class TestAveragePrecision:
    def test_grid_is_exact(self):
        assert RECALL_GRID[7] == 0.07 and len(RECALL_GRID) == 101

    def test_tp_fp_tp(self):
        # recall 0.5 at precision 1, recall 1 at precision 2/3
        assert average_precision([True, False, True], 2) == pytest.approx((51 + 50 * 2 / 3) / 101, abs=1e-12)

    def test_all_hits(self):
        assert average_precision([True, True], 2) == 1.0

    def test_no_detections(self):
        assert average_precision([], 3) == 0.0

    def test_no_ground_truth(self):
        assert average_precision([False], 0) is None

    def test_partial_recall(self):
        # one of four found: recall levels 0..0.25 get precision 1
        assert average_precision([True], 4) == pytest.approx(26 / 101)

    @settings(max_examples=300)
    @given(st.lists(st.booleans(), max_size=30), st.integers(1, 30))
    def test_matches_naive(self, flags, n_gt):
        if sum(flags) > n_gt:
            n_gt = sum(flags)
        assert average_precision(flags, n_gt) == pytest.approx(naive_ap(flags, n_gt), abs=1e-12)

    @settings(max_examples=200)
    @given(st.lists(st.booleans(), max_size=20), st.integers(1, 20))
    def test_trailing_false_positive_never_helps(self, flags, n_gt):
        n_gt = max(n_gt, sum(flags))
        assert average_precision(flags + [False], n_gt) <= average_precision(flags, n_gt)


class TestMatching:
    def test_highest_score_first(self):
        gts = [BBox(0, 0, 10, 10)]
        dets = [Detection(1, 1, BBox(0, 0, 10, 10), 0.3), Detection(1, 1, BBox(0, 0, 10, 10), 0.9)]
        assert match_detections(dets, gts, 0.5) == [(1, True), (0, False)]

    def test_threshold_inclusive(self):
        gts = [BBox(0, 0, 2, 1)]
        dets = [Detection(1, 1, BBox(0, 0, 1, 1), 1.0)]
        assert match_detections(dets, gts, 0.5) == [(0, True)]
        assert match_detections(dets, gts, 0.51) == [(0, False)]

    def test_takes_best_free_gt(self):
        gts = [BBox(0, 0, 10, 10), BBox(2, 0, 10, 10)]
        dets = [Detection(1, 1, BBox(2, 0, 10, 10), 0.9), Detection(1, 1, BBox(0, 0, 10, 10), 0.8)]
        assert match_detections(dets, gts, 0.5) == [(0, True), (1, True)]


class TestEvaluate:
    def test_perfect(self):
        ds = gt_dataset([[(1, (10, 10, 20, 20)), (2, (50, 50, 10, 30))], [(1, (0, 0, 5, 5))]])
        dets = [Detection(a.image_id, a.category_id, a.bbox, 0.5) for a in ds.annotations]
        r = evaluate(dets, ds)
        assert r.mAP == 1.0 and r.ap50 == 1.0

    def test_empty(self):
        ds = gt_dataset([[(1, (10, 10, 20, 20))]])
        r = evaluate([], ds)
        assert r.mAP == 0.0 and r.ap50 == 0.0

    def test_category_without_gt_excluded(self):
        ds = gt_dataset([[(1, (10, 10, 20, 20))]], n_cats=3)
        dets = [Detection(1, 1, BBox(10, 10, 20, 20), 0.9), Detection(1, 3, BBox(0, 0, 5, 5), 0.8)]
        r = evaluate(dets, ds)
        assert r.mAP == 1.0
        assert r.cells[(3, 0.5)].ap is None and r.cells[(3, 0.5)].fp == 1

    def test_unknown_category(self):
        ds = gt_dataset([[(1, (10, 10, 20, 20))]])
        with pytest.raises(ValueError, match="unknown category"):
            evaluate([Detection(1, 9, BBox(0, 0, 1, 1), 0.5)], ds)

    def test_detection_on_image_without_gt_is_fp(self):
        ds = gt_dataset([[(1, (10, 10, 20, 20))], []])
        dets = [Detection(2, 1, BBox(0, 0, 5, 5), 0.9), Detection(1, 1, BBox(10, 10, 20, 20), 0.8)]
        r = evaluate(dets, ds, [0.5])
        assert r.ap50 == 0.5
        assert r.ap50 == pytest.approx(naive_ap([False, True], 1), abs=1e-12)

    def test_ap50_always_reported(self):
        ds = gt_dataset([[(1, (10, 10, 20, 20))]])
        dets = [Detection(1, 1, BBox(12, 10, 20, 20), 0.9)]  # IoU 0.818
        r = evaluate(dets, ds, [0.9])
        assert r.mAP == 0.0 and r.ap50 == 1.0
        assert r.thresholds == (0.9,)

    def test_default_thresholds(self):
        assert COCO_THRESHOLDS == (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)

    def test_json_and_table(self):
        ds = gt_dataset([[(1, (10, 10, 20, 20))]])
        r = evaluate([Detection(1, 1, BBox(10, 10, 20, 20), 0.9)], ds)
        doc = json.loads(r.to_json())
        assert doc["mAP"] == 1.0 and doc["AP50"] == 1.0
        assert "k1" in r.to_table()

    @pytest.mark.parametrize("seed", range(25))
    def test_matches_naive_oracle(self, seed):
        rng = np.random.default_rng(seed)
        ds = random_dataset(rng, n_images=5, n_cats=3, max_anns=4)
        dets = noisy_detections(rng, ds, distinct=bool(seed % 2))
        r = evaluate(dets, ds)
        m, cells = naive_map(dets, ds, COCO_THRESHOLDS)
        assert r.mAP == pytest.approx(m, abs=1e-9)
        for key, ap in cells.items():
            assert r.cells[key].ap == pytest.approx(ap, abs=1e-9)

    @pytest.mark.parametrize("seed", range(10))
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(100 + seed)
        ds = random_dataset(rng, n_images=5)
        dets = noisy_detections(rng, ds)
        perm = [dets[i] for i in rng.permutation(len(dets))]
        assert evaluate(perm, ds).mAP == evaluate(dets, ds).mAP

    @pytest.mark.parametrize("seed", range(10))
    def test_monotone_score_map_invariant(self, seed):
        rng = np.random.default_rng(200 + seed)
        ds = random_dataset(rng, n_images=5)
        dets = noisy_detections(rng, ds)
        squashed = [Detection(d.image_id, d.category_id, d.bbox, d.score ** 3 * 0.5) for d in dets]
        assert evaluate(squashed, ds).mAP == evaluate(dets, ds).mAP

    @pytest.mark.parametrize("seed", range(10))
    def test_lowest_scoring_duplicate_never_helps(self, seed):
        rng = np.random.default_rng(300 + seed)
        ds = random_dataset(rng, n_images=5)
        dets = noisy_detections(rng, ds)
        if not dets:
            return
        low = min(d.score for d in dets)
        d0 = dets[int(rng.integers(len(dets)))]
        extra = Detection(d0.image_id, d0.category_id, d0.bbox, low / 2)
        assert evaluate(dets + [extra], ds).mAP <= evaluate(dets, ds).mAP + 1e-12
