"""Reading and writing COCO annotation files, detection files and images."""

from __future__ import annotations

import json
import math
import os
from typing import Any, Iterable

import numpy as np
from PIL import Image, UnidentifiedImageError

from .datamodel import (
    Annotation, BBox, Category, Dataset, Detection, ImageInfo, check_image,
    validate_dataset,
)


class CocoFormatError(ValueError):
    """A JSON document does not describe a valid dataset or detection list."""


class ImageDecodeError(OSError):
    """An image file is missing, truncated or in an unsupported format."""


_REQUIRED_KEYS = ("images", "annotations", "categories")
_READABLE_FORMATS = {"PNG", "JPEG"}


def _loads(document: str | bytes) -> Any:
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        return json.loads(document)
    except json.JSONDecodeError as exc:
        offset = len(document[: exc.pos].encode("utf-8"))
        raise CocoFormatError(
            f"malformed JSON at byte {offset} (line {exc.lineno}, column {exc.colno}): {exc.msg}"
        ) from exc


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CocoFormatError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _integer(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise CocoFormatError(f"{where}: expected an integer, got {value!r}")
    return value


def _bbox(value: Any, where: str) -> BBox:
    if not isinstance(value, list) or len(value) != 4:
        raise CocoFormatError(f"{where}: bbox must be a list of 4 numbers, got {value!r}")
    x, y, w, h = (_number(v, f"{where}.bbox[{i}]") for i, v in enumerate(value))
    return BBox(x, y, w, h)


def _field(record: Any, key: str, where: str) -> Any:
    if not isinstance(record, dict):
        raise CocoFormatError(f"{where}: expected an object, got {type(record).__name__}")
    if key not in record:
        raise CocoFormatError(f"{where}: missing required key {key!r}")
    return record[key]


def parse_coco(document: str | bytes) -> Dataset:
    data = _loads(document)
    if not isinstance(data, dict):
        raise CocoFormatError("top-level JSON value must be an object")
    for key in _REQUIRED_KEYS:
        if key not in data:
            raise CocoFormatError(f"missing required key {key!r}")
        if not isinstance(data[key], list):
            raise CocoFormatError(f"{key!r} must be an array")

    images = []
    for i, rec in enumerate(data["images"]):
        where = f"images[{i}]"
        file_name = _field(rec, "file_name", where)
        if not isinstance(file_name, str):
            raise CocoFormatError(f"{where}.file_name: expected a string")
        images.append(ImageInfo(
            _integer(_field(rec, "id", where), f"{where}.id"),
            file_name,
            _integer(_field(rec, "width", where), f"{where}.width"),
            _integer(_field(rec, "height", where), f"{where}.height"),
        ))

    annotations = []
    for i, rec in enumerate(data["annotations"]):
        where = f"annotations[{i}]"
        annotations.append(Annotation(
            _integer(_field(rec, "id", where), f"{where}.id"),
            _integer(_field(rec, "image_id", where), f"{where}.image_id"),
            _integer(_field(rec, "category_id", where), f"{where}.category_id"),
            _bbox(_field(rec, "bbox", where), where),
        ))

    categories = []
    for i, rec in enumerate(data["categories"]):
        where = f"categories[{i}]"
        name = _field(rec, "name", where)
        if not isinstance(name, str):
            raise CocoFormatError(f"{where}.name: expected a string")
        categories.append(Category(_integer(_field(rec, "id", where), f"{where}.id"), name))

    ds = Dataset(tuple(images), tuple(annotations), tuple(categories))
    problems = validate_dataset(ds)
    if problems:
        raise CocoFormatError("invalid dataset:\n  " + "\n  ".join(problems))
    return ds


def _num(value: float) -> int | float:
    # Integral floats are emitted without a fractional part; repr() of other
    # floats is already the shortest round-trippable form.
    value = float(value)
    if not math.isfinite(value):
        raise CocoFormatError(f"cannot serialise non-finite number {value}")
    if value.is_integer() and abs(value) < 2**53:
        return int(value)
    return value


def _box_json(b: BBox) -> list[int | float]:
    return [_num(b.x), _num(b.y), _num(b.w), _num(b.h)]


def write_coco(ds: Dataset) -> str:
    problems = validate_dataset(ds)
    if problems:
        raise CocoFormatError("refusing to write invalid dataset:\n  " + "\n  ".join(problems))
    doc = {
        "images": [
            {"id": im.id, "file_name": im.file_name, "width": im.width, "height": im.height}
            for im in ds.images
        ],
        "annotations": [
            {"id": a.id, "image_id": a.image_id, "category_id": a.category_id,
             "bbox": _box_json(a.bbox)}
            for a in ds.annotations
        ],
        "categories": [{"id": c.id, "name": c.name} for c in ds.categories],
    }
    return json.dumps(doc, ensure_ascii=False)


def parse_detections(document: str | bytes) -> list[Detection]:
    data = _loads(document)
    if not isinstance(data, list):
        raise CocoFormatError("detection document must be a JSON array")
    dets = []
    for i, rec in enumerate(data):
        where = f"record {i}"
        score = _number(_field(rec, "score", where), f"{where}.score")
        if not 0.0 <= score <= 1.0:
            raise CocoFormatError(f"{where}: score {score} outside [0, 1]")
        dets.append(Detection(
            _integer(_field(rec, "image_id", where), f"{where}.image_id"),
            _integer(_field(rec, "category_id", where), f"{where}.category_id"),
            _bbox(_field(rec, "bbox", where), where),
            score,
        ))
    return dets


def write_detections(dets: Iterable[Detection]) -> str:
    out = []
    for i, d in enumerate(dets):
        if not 0.0 <= d.score <= 1.0:
            raise CocoFormatError(f"record {i}: score {d.score} outside [0, 1]")
        out.append({"image_id": d.image_id, "category_id": d.category_id,
                    "bbox": _box_json(d.bbox), "score": _num(d.score)})
    return json.dumps(out)


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Decode a PNG or JPEG file into an ``(H, W, 3)`` uint8 array.

    Grayscale is expanded to three channels; alpha is composited over black.
    """
    path = os.fspath(path)
    try:
        with Image.open(path) as im:
            if im.format not in _READABLE_FORMATS:
                raise ImageDecodeError(f"{path}: unsupported image format {im.format}")
            im.load()
            if im.mode == "P":
                im = im.convert("RGBA" if "transparency" in im.info else "RGB")
            if im.mode in ("RGBA", "LA", "La", "RGBa", "PA"):
                rgba = np.asarray(im.convert("RGBA"), dtype=np.uint16)
                alpha = rgba[..., 3:4]
                arr = ((rgba[..., :3] * alpha + 127) // 255).astype(np.uint8)
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except ImageDecodeError:
        raise
    except (OSError, UnidentifiedImageError, SyntaxError, ValueError) as exc:
        raise ImageDecodeError(f"{path}: cannot decode image ({exc})") from exc
    return np.ascontiguousarray(arr)


def save_image(img: np.ndarray, path: str | os.PathLike, format: str = "PNG",
               png_compress_level: int = 1) -> None:
    """Write an RGB array as PNG (default) or JPEG.

    PNG is lossless at every zlib level; the low default trades file size for
    a large cut in encode time on full-resolution outputs.
    """
    check_image(img)
    fmt = format.upper()
    if fmt == "JPG":
        fmt = "JPEG"
    if fmt not in _READABLE_FORMATS:
        raise ValueError(f"unsupported output format {format!r}")
    extra = {"compress_level": png_compress_level} if fmt == "PNG" else {}
    Image.fromarray(np.ascontiguousarray(img), "RGB").save(path, format=fmt, **extra)
