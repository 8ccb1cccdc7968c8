"""COCO-style box mAP: greedy matching, 101-point interpolated AP."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .datamodel import BBox, Dataset, Detection
from .postprocess import iou

COCO_THRESHOLDS: tuple[float, ...] = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
RECALL_GRID = np.arange(101) / 100  # exact k/100, unlike linspace


def match_detections(dets: Sequence[Detection], gts: Sequence[BBox],
                     iou_thresh: float) -> list[tuple[int, bool]]:
    """Greedily match one image/category's detections to its ground truth.

    Detections are visited by descending score (ties by position); each takes
    the still-unmatched GT box with the highest IoU, provided it reaches
    ``iou_thresh``. Returns ``(detection index, matched)`` in visiting order.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    taken = [False] * len(gts)
    out = []
    for i in order:
        best, best_iou = -1, iou_thresh
        for j, g in enumerate(gts):
            if taken[j]:
                continue
            v = iou(dets[i].bbox, g)
            if v >= best_iou:
                best, best_iou = j, v
        if best >= 0:
            taken[best] = True
        out.append((i, best >= 0))
    return out


def average_precision(matched: Sequence[bool], n_gt: int) -> float | None:
    """101-point interpolated AP from score-ordered match flags.

    Returns ``None`` when there is no ground truth.
    """
    if n_gt <= 0:
        return None
    flags = np.asarray(matched, dtype=bool)
    if flags.size == 0:
        return 0.0
    tp = np.cumsum(flags)
    fp = np.cumsum(~flags)
    recall = tp / n_gt
    precision = tp / (tp + fp)
    # precision envelope: best precision at any recall >= this one
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_GRID, side="left")
    sampled = np.where(idx < len(envelope), envelope[np.minimum(idx, len(envelope) - 1)], 0.0)
    return float(sampled.mean())


@dataclass(frozen=True)
class EvalCell:
    ap: float | None
    n_gt: int
    tp: int
    fp: int


@dataclass
class EvalReport:
    cells: dict[tuple[int, float], EvalCell]
    thresholds: tuple[float, ...]
    category_names: dict[int, str] = field(default_factory=dict)

    def _mean(self, thresholds: Iterable[float]) -> float:
        vals = [c.ap for (cat, t), c in self.cells.items()
                if t in set(thresholds) and c.ap is not None]
        return float(np.mean(vals)) if vals else 0.0

    @property
    def mAP(self) -> float:
        """Mean over categories with ground truth, then over thresholds."""
        per_threshold = []
        for t in self.thresholds:
            vals = [c.ap for (cat, tt), c in self.cells.items() if tt == t and c.ap is not None]
            if vals:
                per_threshold.append(float(np.mean(vals)))
        return float(np.mean(per_threshold)) if per_threshold else 0.0

    @property
    def ap50(self) -> float:
        return self._mean([0.5])

    def per_category(self) -> dict[int, float]:
        out: dict[int, list[float]] = defaultdict(list)
        for (cat, t), c in self.cells.items():
            if c.ap is not None and t in self.thresholds:
                out[cat].append(c.ap)
        return {cat: float(np.mean(v)) for cat, v in sorted(out.items())}

    def to_json(self) -> str:
        return json.dumps({
            "mAP": self.mAP,
            "AP50": self.ap50,
            "thresholds": list(self.thresholds),
            "cells": [
                {"category_id": cat, "category": self.category_names.get(cat, str(cat)),
                 "iou": t, "ap": c.ap, "n_gt": c.n_gt, "tp": c.tp, "fp": c.fp}
                for (cat, t), c in sorted(self.cells.items())
            ],
        }, indent=2)

    def to_table(self) -> str:
        per_cat = self.per_category()
        ap50 = {cat: c.ap for (cat, t), c in self.cells.items() if t == 0.5}
        name_w = max([8] + [len(self.category_names.get(c, str(c))) for c in per_cat])
        lines = [f"{'category':<{name_w}}  {'AP':>6}  {'AP50':>6}"]
        for cat, ap in per_cat.items():
            a50 = ap50.get(cat)
            a50s = f"{a50:6.3f}" if a50 is not None else "   n/a"
            lines.append(f"{self.category_names.get(cat, str(cat)):<{name_w}}  {ap:6.3f}  {a50s}")
        lines.append(f"{'mAP':<{name_w}}  {self.mAP:6.3f}  {self.ap50:6.3f}")
        return "\n".join(lines)


def evaluate(dets: Sequence[Detection], gt: Dataset,
             thresholds: Sequence[float] | None = None) -> EvalReport:
    """Score detections against a ground-truth dataset.

    ``thresholds`` defaults to 0.50:0.05:0.95. AP50 is always computed and
    reported alongside, even when 0.5 is not among the averaged thresholds.
    """
    thresholds = tuple(thresholds) if thresholds is not None else COCO_THRESHOLDS
    cats = gt.category_by_id()
    for i, d in enumerate(dets):
        if d.category_id not in cats:
            raise ValueError(f"detection {i} has unknown category id {d.category_id}")

    gt_boxes: dict[tuple[int, int], list[BBox]] = defaultdict(list)
    for a in gt.annotations:
        gt_boxes[(a.image_id, a.category_id)].append(a.bbox)
    det_groups: dict[tuple[int, int], list[Detection]] = defaultdict(list)
    for d in dets:
        det_groups[(d.image_id, d.category_id)].append(d)

    all_thresholds = thresholds if 0.5 in thresholds else (*thresholds, 0.5)
    cells: dict[tuple[int, float], EvalCell] = {}
    image_ids = sorted({im.id for im in gt.images} | {d.image_id for d in dets})
    for cat in sorted(cats):
        n_gt = sum(len(gt_boxes.get((im, cat), ())) for im in image_ids)
        for t in all_thresholds:
            scored: list[tuple[float, bool]] = []
            for im in image_ids:
                group = det_groups.get((im, cat))
                if not group:
                    continue
                for i, ok in match_detections(group, gt_boxes.get((im, cat), []), t):
                    scored.append((group[i].score, ok))
            # stable sort keeps image order for equal scores
            scored.sort(key=lambda r: -r[0])
            flags = [ok for _, ok in scored]
            tp = sum(flags)
            cells[(cat, t)] = EvalCell(average_precision(flags, n_gt), n_gt, tp, len(flags) - tp)
    report = EvalReport(cells, thresholds, {c.id: c.name for c in gt.categories})
    return report
