"""Detection post-processing: IoU, class-wise NMS, TTA fusion, major-class suppression."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .datamodel import BBox, Detection

TTA_RESOLUTIONS = ((982, 982), (1472, 1472), (2208, 2208))


@dataclass(frozen=True)
class TtaVariant:
    """Inference resolution and flip state of one test-time view."""

    width: int
    height: int
    hflipped: bool = False

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"variant resolution must be at least 1x1, got {self.width}x{self.height}")


@dataclass(frozen=True)
class SuppressionParams:
    factor: float = 0.3

    def __post_init__(self) -> None:
        if not 0.0 <= self.factor <= 1.0:
            raise ValueError(f"suppression factor must lie in [0, 1], got {self.factor}")


def default_tta_variants() -> list[TtaVariant]:
    """The three square resolutions, each with and without a horizontal flip."""
    return [TtaVariant(w, h, flip) for (w, h) in TTA_RESOLUTIONS for flip in (False, True)]


def iou(a: BBox, b: BBox) -> float:
    # areas come from the same edge sums as the overlap so iou(a, a) == 1 exactly
    ax2, ay2, bx2, by2 = a.x + a.w, a.y + a.h, b.x + b.w, b.y + b.h
    iw = min(ax2, bx2) - max(a.x, b.x)
    ih = min(ay2, by2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax2 - a.x) * (ay2 - a.y) + (bx2 - b.x) * (by2 - b.y) - inter
    if union <= 0:
        return 0.0
    return min(1.0, inter / union)


def _single_image(dets: Sequence[Detection]) -> None:
    ids = {d.image_id for d in dets}
    if len(ids) > 1:
        raise ValueError(f"detections span several images: {sorted(ids)}")


def _by_score(dets: Sequence[Detection]) -> list[int]:
    # descending score, ties by input position
    return sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))


def nms(dets: Sequence[Detection], iou_thresh: float = 0.5) -> list[Detection]:
    """Greedy class-wise NMS for one image.

    Within each category the best remaining box is kept and any box with
    IoU strictly above ``iou_thresh`` against it is dropped.
    """
    if not 0.0 <= iou_thresh <= 1.0:
        raise ValueError(f"iou_thresh must lie in [0, 1], got {iou_thresh}")
    _single_image(dets)
    kept: dict[int, list[BBox]] = defaultdict(list)
    keep_idx = []
    for i in _by_score(dets):
        d = dets[i]
        if all(iou(d.bbox, k) <= iou_thresh for k in kept[d.category_id]):
            kept[d.category_id].append(d.bbox)
            keep_idx.append(i)
    return [dets[i] for i in keep_idx]


def nms_per_image(dets: Iterable[Detection], iou_thresh: float = 0.5) -> list[Detection]:
    out: list[Detection] = []
    for _, group in sorted(group_by_image(dets).items()):
        out.extend(nms(group, iou_thresh))
    return out


def group_by_image(dets: Iterable[Detection]) -> dict[int, list[Detection]]:
    groups: dict[int, list[Detection]] = defaultdict(list)
    for d in dets:
        groups[d.image_id].append(d)
    return dict(groups)


def map_to_original(dets: Iterable[Detection], variant: TtaVariant,
                    original: tuple[int, int]) -> list[Detection]:
    """Undo the flip (if any) at variant resolution, then rescale per axis."""
    ow, oh = original
    sx, sy = ow / variant.width, oh / variant.height
    out = []
    for d in dets:
        b = d.bbox
        x = variant.width - b.x - b.w if variant.hflipped else b.x
        out.append(replace(d, bbox=BBox(x * sx, b.y * sy, b.w * sx, b.h * sy)))
    return out


def map_to_variant(dets: Iterable[Detection], variant: TtaVariant,
                   original: tuple[int, int]) -> list[Detection]:
    """Inverse of :func:`map_to_original`."""
    ow, oh = original
    sx, sy = variant.width / ow, variant.height / oh
    out = []
    for d in dets:
        b = d.bbox
        x, w = b.x * sx, b.w * sx
        if variant.hflipped:
            x = variant.width - x - w
        out.append(replace(d, bbox=BBox(x, b.y * sy, w, b.h * sy)))
    return out


def _clip(d: Detection, width: float, height: float) -> Detection | None:
    b = d.bbox
    x1, y1 = max(b.x, 0.0), max(b.y, 0.0)
    x2, y2 = min(b.x + b.w, width), min(b.y + b.h, height)
    if x2 <= x1 or y2 <= y1:
        return None
    if b.x >= 0 and b.y >= 0 and b.x + b.w <= width and b.y + b.h <= height:
        return d
    return replace(d, bbox=BBox(x1, y1, x2 - x1, y2 - y1))


def tta_fuse(per_variant: Sequence[tuple[TtaVariant, Sequence[Detection]]],
             original: tuple[int, int], iou_thresh: float = 0.5) -> list[Detection]:
    """Fuse one image's detections from several test-time views.

    Each list is mapped back to the original frame and clipped to it; the
    concatenation then goes through class-wise NMS.
    """
    pooled: list[Detection] = []
    for variant, dets in per_variant:
        for d in map_to_original(dets, variant, original):
            c = _clip(d, *original)
            if c is not None:
                pooled.append(c)
    return nms(pooled, iou_thresh)


def major_class_suppress(dets: Sequence[Detection],
                         p: SuppressionParams | None = None) -> list[Detection]:
    """Down-weight every detection whose class differs from the top-scoring one.

    The major class comes from the single highest-score detection (ties go
    to the lower category id, then the earlier detection). Output is sorted
    by adjusted score, ties by input position.
    """
    p = p or SuppressionParams()
    _single_image(dets)
    if not dets:
        return []
    top = min(range(len(dets)), key=lambda i: (-dets[i].score, dets[i].category_id, i))
    major = dets[top].category_id
    adjusted = [d if d.category_id == major else replace(d, score=d.score * p.factor)
                for d in dets]
    return [adjusted[i] for i in _by_score(adjusted)]


def major_class_suppress_per_image(dets: Iterable[Detection],
                                   p: SuppressionParams | None = None) -> list[Detection]:
    out: list[Detection] = []
    for _, group in sorted(group_by_image(dets).items()):
        out.extend(major_class_suppress(group, p))
    return out


def parse_variants(document: str) -> tuple[list[TtaVariant], dict[int, tuple[int, int]]]:
    """Read a TTA sidecar.

    ``{"variants": [{"width": 982, "height": 982, "hflip": false}, ...],
    "original_sizes": [{"image_id": 1, "width": 640, "height": 480}, ...]}``
    """
    doc = json.loads(document)
    try:
        variants = [TtaVariant(int(v["width"]), int(v["height"]), bool(v.get("hflip", False)))
                    for v in doc["variants"]]
        sizes = {int(r["image_id"]): (int(r["width"]), int(r["height"]))
                 for r in doc.get("original_sizes", [])}
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed TTA sidecar: {exc!r}") from exc
    return variants, sizes


def write_variants(variants: Sequence[TtaVariant], sizes: dict[int, tuple[int, int]]) -> str:
    return json.dumps({
        "variants": [{"width": v.width, "height": v.height, "hflip": v.hflipped} for v in variants],
        "original_sizes": [{"image_id": k, "width": w, "height": h}
                           for k, (w, h) in sorted(sizes.items())],
    }, indent=2)
