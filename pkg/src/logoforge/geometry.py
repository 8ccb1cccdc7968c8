"""Box-aware geometric augmentations.

Every function takes a :class:`~logoforge.datamodel.Sample` and returns a new
one. Boxes are transformed analytically; images are transformed with numpy
index operations (rotation, flip, padding) or Pillow resampling (scaling).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from PIL import Image

from .datamodel import Annotation, BBox, Sample

Interpolation = Literal["bilinear", "nearest"]

_PIL_FILTERS = {
    "bilinear": Image.Resampling.BILINEAR,
    "nearest": Image.Resampling.NEAREST,
}


@dataclass(frozen=True)
class ScaleJitterParams:
    min_ratio: float = 0.1
    max_ratio: float = 2.0

    def __post_init__(self) -> None:
        if not 0 < self.min_ratio <= self.max_ratio:
            raise ValueError(
                f"need 0 < min_ratio <= max_ratio, got {self.min_ratio}, {self.max_ratio}"
            )

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.min_ratio, self.max_ratio))


@dataclass(frozen=True)
class MixupParams:
    alpha: float = 0.5
    jitter: ScaleJitterParams = field(default_factory=ScaleJitterParams)

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")


def _check_rotation(n: int) -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n not in (0, 1, 2, 3):
        raise ValueError(f"rotation must be 0, 1, 2 or 3 quarter-turns, got {n!r}")
    return int(n)


def _with_boxes(s: Sample, boxes: list[BBox]) -> list[Annotation]:
    return [
        Annotation(a.id, a.image_id, a.category_id, b)
        for a, b in zip(s.annotations, boxes)
    ]


def resize(s: Sample, width: int, height: int,
           interpolation: Interpolation = "bilinear") -> Sample:
    """Resample to exactly ``width`` x ``height``; boxes scale per axis.

    Boxes are clipped and filtered afterwards.
    """
    if width < 1 or height < 1:
        raise ValueError(f"target size must be at least 1x1, got {width}x{height}")
    if interpolation not in _PIL_FILTERS:
        raise ValueError(f"unknown interpolation {interpolation!r}")
    if (width, height) == (s.width, s.height):
        return clip_and_filter(s)
    W, H = s.width, s.height
    img = Image.fromarray(np.ascontiguousarray(s.image), "RGB")
    out = np.asarray(img.resize((width, height), _PIL_FILTERS[interpolation]))
    boxes = []
    for a in s.annotations:
        # scale edges as v * new / old so an edge on the border stays on it exactly
        x1, x2 = a.bbox.x * width / W, (a.bbox.x + a.bbox.w) * width / W
        y1, y2 = a.bbox.y * height / H, (a.bbox.y + a.bbox.h) * height / H
        boxes.append(BBox(x1, y1, x2 - x1, y2 - y1))
    return clip_and_filter(Sample(out, _with_boxes(s, boxes), s.image_id))


def scaled_size(width: int, height: int, ratio: float) -> tuple[int, int]:
    # round-half-up, floored at one pixel
    return (max(1, math.floor(width * ratio + 0.5)),
            max(1, math.floor(height * ratio + 0.5)))


def scale_jitter(s: Sample, ratio: float,
                 interpolation: Interpolation = "bilinear") -> Sample:
    """Isotropic rescale by ``ratio``.

    Output dims are ``round(dim * ratio)`` (at least 1). Boxes use the
    realised per-axis ratios so they stay aligned with the pixels.
    """
    if not ratio > 0:
        raise ValueError(f"scale ratio must be positive, got {ratio}")
    w, h = scaled_size(s.width, s.height, ratio)
    return resize(s, w, h, interpolation)


def rotate90(s: Sample, n: int) -> Sample:
    """Rotate by ``n`` clockwise quarter-turns."""
    n = _check_rotation(n)
    if n == 0:
        return s
    img = s.image
    boxes = [a.bbox for a in s.annotations]
    for _ in range(n):
        h = img.shape[0]
        # pixel (x, y) -> (H-1-y, x); box (x, y, w, h) -> (H-y-h, x, h, w)
        boxes = [BBox(h - b.y - b.h, b.x, b.h, b.w) for b in boxes]
        img = np.rot90(img, k=-1)
    return Sample(np.ascontiguousarray(img), _with_boxes(s, boxes), s.image_id)


def hflip(s: Sample) -> Sample:
    w = s.width
    boxes = [BBox(w - a.bbox.x - a.bbox.w, a.bbox.y, a.bbox.w, a.bbox.h)
             for a in s.annotations]
    img = np.ascontiguousarray(s.image[:, ::-1])
    return Sample(img, _with_boxes(s, boxes), s.image_id)


def pad_to(s: Sample, target_w: int, target_h: int, fill: int = 0) -> Sample:
    """Pad on the right and bottom so the content stays anchored at (0, 0)."""
    if target_w < s.width or target_h < s.height:
        raise ValueError(
            f"pad target {target_w}x{target_h} is smaller than the image "
            f"{s.width}x{s.height}"
        )
    if not 0 <= fill <= 255:
        raise ValueError(f"fill must be a channel value in [0, 255], got {fill}")
    if (target_w, target_h) == (s.width, s.height):
        return s
    out = np.full((target_h, target_w, 3), fill, dtype=np.uint8)
    out[: s.height, : s.width] = s.image
    return s.replace(image=out)


def clip_and_filter(s: Sample, min_box_size: float = 1.0) -> Sample:
    """Intersect boxes with the image and drop any thinner than ``min_box_size``."""
    W, H = s.width, s.height
    kept = []
    changed = False
    for a in s.annotations:
        b = a.bbox
        x1, y1 = max(b.x, 0.0), max(b.y, 0.0)
        x2, y2 = min(b.x + b.w, W), min(b.y + b.h, H)
        w, h = x2 - x1, y2 - y1
        if not (w >= min_box_size and h >= min_box_size):
            changed = True
            continue
        if (x1, y1, w, h) != (b.x, b.y, b.w, b.h):
            changed = True
            a = Annotation(a.id, a.image_id, a.category_id, BBox(x1, y1, w, h))
        kept.append(a)
    return s.replace(annotations=kept) if changed else s


def blend_images(a: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
    """``round(alpha * a + (1 - alpha) * b)`` with round-half-up."""
    mixed = alpha * a.astype(np.float64) + (1.0 - alpha) * b.astype(np.float64)
    return np.clip(np.floor(mixed + 0.5), 0, 255).astype(np.uint8)


def simple_mixup(a: Sample, b: Sample, p: MixupParams | None = None,
                 ratios: tuple[float, float] = (1.0, 1.0),
                 interpolation: Interpolation = "bilinear") -> Sample:
    """Scale-jitter two samples separately, zero-pad to a common shape and blend.

    The result keeps every surviving box from both inputs with its own
    category and carries ``a``'s image id.
    """
    p = p or MixupParams()
    a2 = scale_jitter(a, ratios[0], interpolation)
    b2 = scale_jitter(b, ratios[1], interpolation)
    tw, th = max(a2.width, b2.width), max(a2.height, b2.height)
    a2 = pad_to(a2, tw, th, 0)
    b2 = pad_to(b2, tw, th, 0)
    pixels = blend_images(a2.image, b2.image, p.alpha)
    b_anns = [Annotation(x.id, a.image_id, x.category_id, x.bbox) for x in b2.annotations]
    return clip_and_filter(Sample(pixels, [*a2.annotations, *b_anns], a.image_id))
