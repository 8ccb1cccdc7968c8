"""Random value generators and brute-force oracles shared by the tests.

The oracles here deliberately avoid the package's own helpers so they form
an independent route to each expected value.
"""

from __future__ import annotations

import itertools

import numpy as np
from hypothesis import strategies as st

from logoforge.datamodel import Annotation, BBox, Category, Dataset, Detection, ImageInfo, Sample


# ---------------------------------------------------------------- generators

def random_image(rng: np.random.Generator, w: int, h: int) -> np.ndarray:
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)


def random_int_box(rng: np.random.Generator, w: int, h: int) -> BBox:
    x = int(rng.integers(0, w))
    y = int(rng.integers(0, h))
    bw = int(rng.integers(1, w - x + 1))
    bh = int(rng.integers(1, h - y + 1))
    return BBox(float(x), float(y), float(bw), float(bh))


def random_sample(rng: np.random.Generator, max_side: int = 32, max_boxes: int = 4,
                  image_id: int = 1) -> Sample:
    w = int(rng.integers(1, max_side + 1))
    h = int(rng.integers(1, max_side + 1))
    n = int(rng.integers(0, max_boxes + 1))
    anns = [Annotation(i + 1, image_id, int(rng.integers(1, 4)), random_int_box(rng, w, h))
            for i in range(n)]
    return Sample(random_image(rng, w, h), anns, image_id)


def random_dataset(rng: np.random.Generator, n_images: int = 6, n_cats: int = 3,
                   max_anns: int = 3, name_prefix: str = "c") -> Dataset:
    cats = [Category(int(i), f"{name_prefix}{i}") for i in rng.permutation(np.arange(1, n_cats + 1))]
    images, anns = [], []
    for i in range(n_images):
        w, h = int(rng.integers(8, 64)), int(rng.integers(8, 64))
        images.append(ImageInfo(i + 1, f"img_{i + 1}.png", w, h))
        for _ in range(int(rng.integers(0, max_anns + 1))):
            anns.append(Annotation(len(anns) + 1, i + 1, cats[int(rng.integers(n_cats))].id,
                                   random_int_box(rng, w, h)))
    return Dataset(images, anns, cats)


_finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
_positive = st.floats(min_value=1e-3, max_value=1e6, allow_nan=False, allow_infinity=False)
bboxes = st.builds(BBox, _finite, _finite, _positive, _positive)


@st.composite
def datasets(draw) -> Dataset:
    n_cats = draw(st.integers(0, 4))
    cat_ids = draw(st.lists(st.integers(-50, 500), min_size=n_cats, max_size=n_cats, unique=True))
    names = draw(st.lists(st.text(min_size=1, max_size=8), min_size=n_cats, max_size=n_cats, unique=True))
    cats = [Category(i, n) for i, n in zip(cat_ids, names)]
    img_ids = draw(st.lists(st.integers(0, 10_000), max_size=6, unique=True))
    images = [ImageInfo(i, draw(st.text(min_size=1, max_size=12)), draw(st.integers(1, 5000)),
                        draw(st.integers(1, 5000))) for i in img_ids]
    anns = []
    if cats and images:
        n_anns = draw(st.integers(0, 8))
        ann_ids = draw(st.lists(st.integers(0, 10**9), min_size=n_anns, max_size=n_anns, unique=True))
        for aid in ann_ids:
            anns.append(Annotation(aid, draw(st.sampled_from(img_ids)),
                                   draw(st.sampled_from(cat_ids)), draw(bboxes)))
    return Dataset(images, anns, cats)


detections = st.builds(
    Detection, st.integers(0, 10_000), st.integers(0, 100), bboxes,
    st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
)


# ------------------------------------------------------------------- oracles

def box_mask(w: int, h: int, box: BBox) -> np.ndarray:
    """Rasterise an integer-aligned box as a white-on-black image."""
    img = np.zeros((h, w, 3), dtype=np.uint8)
    x0, y0 = int(box.x), int(box.y)
    img[y0:y0 + int(box.h), x0:x0 + int(box.w)] = 255
    return img


def tight_bbox(mask: np.ndarray, threshold: int = 128) -> tuple[int, int, int, int] | None:
    """(x, y, w, h) of the pixels at or above ``threshold`` in channel 0."""
    on = mask[..., 0] >= threshold
    if not on.any():
        return None
    rows = [y for y in range(on.shape[0]) if on[y].any()]
    cols = [x for x in range(on.shape[1]) if on[:, x].any()]
    return cols[0], rows[0], cols[-1] - cols[0] + 1, rows[-1] - rows[0] + 1


def box_iou_oracle(a: BBox, b: BBox) -> float:
    ax1, ay1, ax2, ay2 = a.x, a.y, a.x + a.w, a.y + a.h
    bx1, by1, bx2, by2 = b.x, b.y, b.x + b.w, b.y + b.h
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union if union > 0 else 0.0


def _iou_matrix(dets: list[Detection]) -> list[list[float]]:
    return [[box_iou_oracle(a.bbox, b.bbox) for b in dets] for a in dets]


def nms_oracle(dets: list[Detection], thresh: float) -> list[Detection]:
    """Greedy NMS by its recursive definition.

    Box ``i`` survives iff no higher-ranked, same-class, *surviving* box
    overlaps it by more than ``thresh``; rank is (score desc, index asc).
    """
    n = len(dets)
    order = sorted(range(n), key=lambda i: (-dets[i].score, i))
    rank = {i: r for r, i in enumerate(order)}
    ious = _iou_matrix(dets)
    memo: dict[int, bool] = {}

    def survives(i: int) -> bool:
        if i not in memo:
            memo[i] = not any(
                rank[j] < rank[i] and dets[j].category_id == dets[i].category_id
                and ious[i][j] > thresh and survives(j)
                for j in range(n)
            )
        return memo[i]

    return [dets[i] for i in order if survives(i)]


def nms_oracle_enumerate(dets: list[Detection], thresh: float) -> list[Detection]:
    """Enumerate every keep-set and return the unique greedy fixed point."""
    n = len(dets)
    order = sorted(range(n), key=lambda i: (-dets[i].score, i))
    rank = {i: r for r, i in enumerate(order)}
    ious = _iou_matrix(dets)
    found = []
    for size in range(n + 1):
        for subset in itertools.combinations(range(n), size):
            keep = set(subset)
            if all(
                (i in keep) != any(
                    j in keep and rank[j] < rank[i]
                    and dets[j].category_id == dets[i].category_id and ious[i][j] > thresh
                    for j in range(n))
                for i in range(n)
            ):
                found.append(keep)
    assert len(found) == 1, found
    return [dets[i] for i in order if i in found[0]]


def naive_ap(flags: list[bool], n_gt: int) -> float:
    """Interpolated AP: mean over 101 recall levels of the best precision at recall >= r."""
    points = []
    tp = fp = 0
    for f in flags:
        tp += f
        fp += not f
        points.append((tp / n_gt, tp / (tp + fp)))
    total = 0.0
    for k in range(101):
        r = k / 100
        total += max([p for rec, p in points if rec >= r], default=0.0)
    return total / 101


def naive_map(dets: list[Detection], gt: Dataset, thresholds) -> tuple[float, dict]:
    """Loop-heavy reimplementation of COCO-style bbox mAP."""
    cells = {}
    for cat in gt.categories:
        gts_all = [a for a in gt.annotations if a.category_id == cat.id]
        if not gts_all:
            continue
        for t in thresholds:
            records = []
            for im in sorted({i.id for i in gt.images} | {d.image_id for d in dets}):
                mine = [(d.score, k, d) for k, d in enumerate(dets)
                        if d.image_id == im and d.category_id == cat.id]
                mine.sort(key=lambda r: (-r[0], r[1]))
                gts = [a.bbox for a in gts_all if a.image_id == im]
                used = set()
                for score, _, d in mine:
                    best, best_v = None, -1.0
                    for j, g in enumerate(gts):
                        if j in used:
                            continue
                        v = box_iou_oracle(d.bbox, g)
                        if v >= t and v >= best_v:
                            best, best_v = j, v
                    if best is not None:
                        used.add(best)
                    records.append((score, best is not None))
            records.sort(key=lambda r: -r[0])
            cells[(cat.id, t)] = naive_ap([ok for _, ok in records], len(gts_all))
    per_t = []
    for t in thresholds:
        vals = [v for (c, tt), v in cells.items() if tt == t]
        if vals:
            per_t.append(sum(vals) / len(vals))
    return (sum(per_t) / len(per_t) if per_t else 0.0), cells


def noisy_detections(rng, ds, fp_rate=1.0, distinct=True):
    """Jittered copies of the GT, some wrong labels, plus random false positives."""
    out = []
    n_cats = len(ds.categories)
    cat_ids = [c.id for c in ds.categories]
    im_sizes = {im.id: (im.width, im.height) for im in ds.images}
    for a in ds.annotations:
        if rng.uniform() < 0.2:
            continue
        b = a.bbox
        j = rng.normal(0, 0.15, 4) * [b.w, b.h, b.w, b.h]
        cat = a.category_id if rng.uniform() < 0.8 else cat_ids[int(rng.integers(n_cats))]
        out.append(Detection(a.image_id, cat, BBox(b.x + j[0], b.y + j[1], max(0.5, b.w + j[2]), max(0.5, b.h + j[3])),
                             float(rng.uniform())))
    for im, (w, h) in im_sizes.items():
        for _ in range(int(rng.poisson(fp_rate))):
            bw, bh = rng.uniform(1, w), rng.uniform(1, h)
            out.append(Detection(im, cat_ids[int(rng.integers(n_cats))],
                                 BBox(rng.uniform(0, w - bw), rng.uniform(0, h - bh), bw, bh), float(rng.uniform())))
    if not distinct:
        out = [Detection(d.image_id, d.category_id, d.bbox, round(d.score, 1)) for d in out]
    return out
