"""Command-line entry point: ``logoforge <subcommand> ...``.

Exit codes: 0 on success, 1 when some images failed, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from functools import reduce
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw

from . import coco_io, postprocess
from .datamodel import DatasetError, merge_datasets, split_dataset
from .evaluation import COCO_THRESHOLDS, evaluate
from .pipeline import PipelineConfigError, build_pipeline, config_from_json, run_dataset

log = logging.getLogger("logoforge")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _write(path: str, text: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")


def cmd_augment(args: argparse.Namespace) -> int:
    try:
        cfg = config_from_json(_read(args.config))
    except PipelineConfigError as exc:
        raise UsageError(f"{args.config}{exc.where}: {exc}") from exc
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    ds = coco_io.parse_coco(_read(args.ann))
    pipe = build_pipeline(cfg)
    out = Path(args.out)
    result = run_dataset(pipe, ds, args.images, out, workers=args.workers)
    _write(str(out / "annotations.json"), coco_io.write_coco(result.dataset))

    print(f"augmented {len(result.dataset.images)} image passes -> {out}")
    for spec, rate in zip(cfg.stages, result.fire_rates()):
        print(f"  {spec.kind:<20} fired {rate:6.1%}")
    if result.failures:
        print(f"{len(result.failures)} image(s) failed:")
        for image_id, err in result.failures:
            print(f"  image {image_id}: {err}")
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_postprocess(args: argparse.Namespace) -> int:
    if not 0.0 <= args.factor <= 1.0:
        raise UsageError(f"--factor must lie in [0, 1], got {args.factor}")
    if not 0.0 <= args.iou <= 1.0:
        raise UsageError(f"--iou must lie in [0, 1], got {args.iou}")
    det_lists = [coco_io.parse_detections(_read(p)) for p in args.dets]

    if args.mode == "tta-fuse":
        if not args.variants:
            raise UsageError("--mode tta-fuse needs --variants")
        variants, sizes = postprocess.parse_variants(_read(args.variants))
        if len(variants) != len(det_lists):
            raise UsageError(f"sidecar lists {len(variants)} variants but {len(det_lists)} --dets files were given")
        grouped = [postprocess.group_by_image(d) for d in det_lists]
        image_ids = sorted(set().union(*grouped)) if grouped else []
        out = []
        for image_id in image_ids:
            if image_id not in sizes:
                raise UsageError(f"sidecar has no original size for image {image_id}")
            per_variant = [(v, g.get(image_id, [])) for v, g in zip(variants, grouped)]
            out.extend(postprocess.tta_fuse(per_variant, sizes[image_id], args.iou))
    else:
        if len(det_lists) != 1:
            raise UsageError(f"--mode {args.mode} takes exactly one --dets file")
        if args.mode == "nms":
            out = postprocess.nms_per_image(det_lists[0], args.iou)
        else:
            out = postprocess.major_class_suppress_per_image(
                det_lists[0], postprocess.SuppressionParams(args.factor))
    _write(args.out, coco_io.write_detections(out))
    print(f"wrote {len(out)} detections -> {args.out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    gt = coco_io.parse_coco(_read(args.gt))
    dets = coco_io.parse_detections(_read(args.dets))
    thresholds = COCO_THRESHOLDS if args.thresholds is None else tuple(args.thresholds)
    for t in thresholds:
        if not 0.0 <= t <= 1.0:
            raise UsageError(f"IoU threshold {t} outside [0, 1]")
    report = evaluate(dets, gt, thresholds)
    print(report.to_table())
    if args.out:
        _write(args.out, report.to_json())
    return EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    ds = coco_io.parse_coco(_read(args.ann))
    train, val = split_dataset(ds, args.per_class, args.seed)
    _write(args.out_train, coco_io.write_coco(train))
    _write(args.out_val, coco_io.write_coco(val))
    print(f"train: {len(train.images)} images, val: {len(val.images)} images")
    return EXIT_OK


def cmd_merge(args: argparse.Namespace) -> int:
    parts = [coco_io.parse_coco(_read(p)) for p in args.inputs]
    merged = reduce(merge_datasets, parts)
    _write(args.out, coco_io.write_coco(merged))
    print(f"merged {len(parts)} datasets: {len(merged.images)} images, "
          f"{len(merged.annotations)} annotations, {len(merged.categories)} categories")
    return EXIT_OK


def render_boxes(img: np.ndarray, boxes: Sequence[tuple[tuple[float, float, float, float], str]]) -> np.ndarray:
    """Draw box outlines with text labels; returns a new array."""
    if not boxes:
        return img.copy()
    canvas = Image.fromarray(np.ascontiguousarray(img), "RGB")
    draw = ImageDraw.Draw(canvas)
    for (x, y, w, h), label in boxes:
        draw.rectangle([x, y, x + w - 1, y + h - 1], outline=(255, 0, 0), width=2)
        draw.text((x + 2, max(0.0, y - 11)), label, fill=(255, 255, 0))
    return np.asarray(canvas)


def cmd_visualize(args: argparse.Namespace) -> int:
    ds = coco_io.parse_coco(_read(args.ann))
    names = {c.id: c.name for c in ds.categories}
    if args.dets:
        dets = coco_io.parse_detections(_read(args.dets))
        boxes: dict[int, list] = {}
        for d in dets:
            if d.score >= args.min_score:
                boxes.setdefault(d.image_id, []).append(
                    (tuple(d.bbox.as_list()), f"{names.get(d.category_id, d.category_id)}:{d.score:.2f}"))
    else:
        boxes = {}
        for a in ds.annotations:
            boxes.setdefault(a.image_id, []).append((tuple(a.bbox.as_list()), names[a.category_id]))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = 0
    for im in ds.images:
        try:
            img = coco_io.load_image(Path(args.images) / im.file_name)
        except coco_io.ImageDecodeError as exc:
            log.error("%s", exc)
            failed += 1
            continue
        coco_io.save_image(render_boxes(img, boxes.get(im.id, [])),
                           out / (Path(im.file_name).stem + ".png"))
    print(f"rendered {len(ds.images) - failed} images -> {out}")
    return EXIT_PARTIAL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logoforge",
        description="Augment detection datasets, post-process detections and score them.",
        epilog="exit codes: 0 success, 1 some images failed, 2 usage or input error. "
               "Set LOGOFORGE_LOG=INFO or DEBUG for more logging.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="run an augmentation pipeline over a dataset")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--ann", required=True, help="COCO annotation JSON")
    p.add_argument("--images", required=True, help="directory holding the image files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config's global_seed")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("postprocess", help="NMS, TTA fusion or major-class suppression")
    p.add_argument("--dets", required=True, action="append",
                   help="detection JSON; repeat once per variant for tta-fuse")
    p.add_argument("--variants", help="TTA sidecar JSON (tta-fuse only)")
    p.add_argument("--mode", required=True, choices=["tta-fuse", "major-suppress", "nms"])
    p.add_argument("--factor", type=float, default=0.3)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("eval", help="COCO-style mAP")
    p.add_argument("--gt", required=True)
    p.add_argument("--dets", required=True)
    p.add_argument("--thresholds", type=float, nargs="+", default=None)
    p.add_argument("--out", help="write the report as JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("split", help="hold out N images per class")
    p.add_argument("--ann", required=True)
    p.add_argument("--per-class", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-val", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("merge", help="merge datasets, unifying categories by name")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("visualize", help="draw boxes onto images")
    p.add_argument("--ann", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--dets", help="draw these detections instead of the ground truth")
    p.add_argument("--min-score", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_visualize)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("LOGOFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"logoforge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (coco_io.CocoFormatError, DatasetError, PipelineConfigError, ValueError) as exc:
        print(f"logoforge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
