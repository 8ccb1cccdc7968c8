"""Core value types and dataset-level operations.

Images are ``numpy`` arrays of shape ``(height, width, 3)`` and dtype
``uint8`` (row-major, interleaved RGB). Everything else is a frozen
dataclass so values can be shared between worker threads freely.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class DatasetError(ValueError):
    """Raised when a dataset operation cannot be carried out."""


def check_image(img: np.ndarray) -> np.ndarray:
    """Validate an image buffer and return it unchanged."""
    if not isinstance(img, np.ndarray):
        raise TypeError(f"image must be a numpy array, got {type(img).__name__}")
    if img.dtype != np.uint8:
        raise TypeError(f"image dtype must be uint8, got {img.dtype}")
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"image must have shape (H, W, 3), got {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"image must be at least 1x1, got {img.shape[1]}x{img.shape[0]}")
    return img


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box ``(x, y, w, h)`` in pixels, top-left origin."""

    x: float
    y: float
    w: float
    h: float

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def is_degenerate(self) -> bool:
        return not (self.w > 0 and self.h > 0)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True)
class Annotation:
    id: int
    image_id: int
    category_id: int
    bbox: BBox


@dataclass(frozen=True)
class Category:
    id: int
    name: str


@dataclass(frozen=True)
class ImageInfo:
    id: int
    file_name: str
    width: int
    height: int


@dataclass(frozen=True)
class Detection:
    image_id: int
    category_id: int
    bbox: BBox
    score: float


@dataclass(frozen=True, eq=False)
class Sample:
    """A decoded image together with its annotations.

    The pixel buffer is made read-only on construction; every operation
    returns a new sample.
    """

    image: np.ndarray
    annotations: tuple[Annotation, ...]
    image_id: int

    def __post_init__(self) -> None:
        check_image(self.image)
        if self.image.flags.writeable:
            img = self.image.view()
            img.flags.writeable = False
            object.__setattr__(self, "image", img)
        object.__setattr__(self, "annotations", tuple(self.annotations))
        for ann in self.annotations:
            if ann.image_id != self.image_id:
                raise ValueError(
                    f"annotation {ann.id} has image_id {ann.image_id}, "
                    f"sample has {self.image_id}"
                )

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def height(self) -> int:
        return self.image.shape[0]

    def replace(self, image: np.ndarray | None = None,
                annotations: Iterable[Annotation] | None = None) -> Sample:
        return Sample(
            image=self.image if image is None else image,
            annotations=self.annotations if annotations is None else tuple(annotations),
            image_id=self.image_id,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Sample):
            return NotImplemented
        return (
            self.image_id == other.image_id
            and self.annotations == other.annotations
            and self.image.shape == other.image.shape
            and bool(np.array_equal(self.image, other.image))
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Dataset:
    images: tuple[ImageInfo, ...] = ()
    annotations: tuple[Annotation, ...] = ()
    categories: tuple[Category, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "annotations", tuple(self.annotations))
        object.__setattr__(self, "categories", tuple(self.categories))

    def image_by_id(self) -> dict[int, ImageInfo]:
        return {im.id: im for im in self.images}

    def category_by_id(self) -> dict[int, Category]:
        return {c.id: c for c in self.categories}

    def annotations_by_image(self) -> dict[int, list[Annotation]]:
        out: dict[int, list[Annotation]] = defaultdict(list)
        for ann in self.annotations:
            out[ann.image_id].append(ann)
        return out


def validate_dataset(ds: Dataset) -> list[str]:
    """Return a list of human-readable invariant violations (empty if valid)."""
    problems: list[str] = []

    image_ids = Counter(im.id for im in ds.images)
    for iid, n in sorted(image_ids.items()):
        if n > 1:
            problems.append(f"image id {iid} is duplicated ({n} times)")
    for im in ds.images:
        if im.width < 1 or im.height < 1:
            problems.append(f"image {im.id} has invalid size {im.width}x{im.height}")

    cat_ids = Counter(c.id for c in ds.categories)
    for cid, n in sorted(cat_ids.items()):
        if n > 1:
            problems.append(f"category id {cid} is duplicated ({n} times)")
    cat_names = Counter(c.name for c in ds.categories)
    for name, n in sorted(cat_names.items()):
        if n > 1:
            problems.append(f"category name {name!r} is duplicated ({n} times)")
    for c in ds.categories:
        if not c.name:
            problems.append(f"category {c.id} has an empty name")

    ann_ids = Counter(a.id for a in ds.annotations)
    for aid, n in sorted(ann_ids.items()):
        if n > 1:
            problems.append(f"annotation id {aid} is duplicated ({n} times)")
    for a in ds.annotations:
        if a.image_id not in image_ids:
            problems.append(f"annotation {a.id} references missing image {a.image_id}")
        if a.category_id not in cat_ids:
            problems.append(f"annotation {a.id} references missing category {a.category_id}")
        b = a.bbox
        if not all(np.isfinite([b.x, b.y, b.w, b.h])):
            problems.append(f"annotation {a.id} has a non-finite box {b.as_list()}")
        elif b.is_degenerate():
            problems.append(
                f"annotation {a.id} has a degenerate box (w={b.w}, h={b.h})"
            )
    return problems


def split_dataset(ds: Dataset, per_class_holdout: int, seed: int) -> tuple[Dataset, Dataset]:
    """Hold out ``per_class_holdout`` images per category for validation.

    Categories are visited in ascending id order. For each one, the images
    that contain it and have not already been held out are sampled uniformly
    without replacement. An image containing several categories counts toward
    the first category that picks it.
    """
    if per_class_holdout < 0:
        raise DatasetError(f"per_class_holdout must be >= 0, got {per_class_holdout}")
    rng = np.random.default_rng(seed)

    images_with_cat: dict[int, set[int]] = defaultdict(set)
    for a in ds.annotations:
        images_with_cat[a.category_id].add(a.image_id)

    held: set[int] = set()
    for cat in sorted(ds.categories, key=lambda c: c.id):
        candidates = sorted(images_with_cat.get(cat.id, set()) - held)
        if len(candidates) < per_class_holdout:
            raise DatasetError(
                f"category {cat.id} ({cat.name!r}) has {len(candidates)} available "
                f"images, fewer than the requested holdout of {per_class_holdout}"
            )
        if per_class_holdout == 0:
            continue
        picked = rng.choice(len(candidates), size=per_class_holdout, replace=False)
        held.update(candidates[i] for i in picked)

    def subset(keep: bool) -> Dataset:
        images = tuple(im for im in ds.images if (im.id in held) == keep)
        ids = {im.id for im in images}
        anns = tuple(a for a in ds.annotations if a.image_id in ids)
        return Dataset(images, anns, ds.categories)

    return subset(False), subset(True)


def merge_datasets(a: Dataset, b: Dataset) -> Dataset:
    """Concatenate two datasets, unifying categories by name.

    Image, annotation and category ids are renumbered from 1 in
    ``a``-then-``b`` order.
    """
    names: dict[str, int] = {}
    for cat in [*sorted(a.categories, key=lambda c: c.id),
                *sorted(b.categories, key=lambda c: c.id)]:
        names.setdefault(cat.name, len(names) + 1)
    categories = tuple(Category(cid, name) for name, cid in names.items())

    sizes_by_name: dict[str, tuple[int, int]] = {}
    images: list[ImageInfo] = []
    annotations: list[Annotation] = []
    for src in (a, b):
        cat_map = {c.id: names[c.name] for c in src.categories}
        img_map: dict[int, int] = {}
        for im in src.images:
            size = (im.width, im.height)
            prev = sizes_by_name.setdefault(im.file_name, size)
            if prev != size:
                raise DatasetError(
                    f"file name collision: {im.file_name!r} appears as "
                    f"{prev[0]}x{prev[1]} and {size[0]}x{size[1]}"
                )
            new_id = len(images) + 1
            img_map[im.id] = new_id
            images.append(ImageInfo(new_id, im.file_name, im.width, im.height))
        for ann in src.annotations:
            if ann.image_id not in img_map or ann.category_id not in cat_map:
                raise DatasetError(f"annotation {ann.id} has a dangling reference")
            annotations.append(Annotation(
                len(annotations) + 1, img_map[ann.image_id],
                cat_map[ann.category_id], ann.bbox,
            ))
    return Dataset(tuple(images), tuple(annotations), categories)

