"""
Seeded augmentation pipeline
============================

A pipeline is an ordered list of stages, each firing with its own
probability. Every random draw comes from a stream derived from
(global seed, image id, pass, stage), so results do not depend on how many
worker threads process the dataset.
"""

import hashlib
import tempfile
from pathlib import Path

import numpy as np

from logoforge import (
    Annotation, BBox, Category, Dataset, ImageInfo, ablate, build_pipeline,
    reference_recipe, run_dataset, save_image,
)

rng = np.random.default_rng(3)
root = Path(tempfile.mkdtemp())
(root / "images").mkdir()
images, anns = [], []
for i in range(1, 9):
    w, h = int(rng.integers(60, 120)), int(rng.integers(60, 120))
    save_image(rng.integers(0, 256, (h, w, 3), dtype=np.uint8), root / "images" / f"{i}.png")
    images.append(ImageInfo(i, f"{i}.png", w, h))
    anns.append(Annotation(i, i, 1 + i % 2, BBox(5, 5, w // 3, h // 4)))
ds = Dataset(images, anns, [Category(1, "acme"), Category(2, "globex")])

# the full recipe: Simple-Mixup, rotation, colour jitter, RandAugment, resize
cfg = reference_recipe(resolution=96, global_seed=11)
pipe = build_pipeline(cfg)
print("stages:", pipe.kinds)


def digest(folder):
    h = hashlib.sha256()
    for p in sorted(folder.iterdir()):
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


one = run_dataset(pipe, ds, root / "images", root / "w1", workers=1)
four = run_dataset(pipe, ds, root / "images", root / "w4", workers=4)
print("1 worker :", digest(root / "w1"))
print("4 workers:", digest(root / "w4"))
for spec, rate in zip(cfg.stages, one.fire_rates()):
    print(f"  {spec.kind:<20} fired {rate:.0%}")

# ablations drop one stage; dropping Simple-Mixup keeps plain scale jitter
for tag in ("ROT", "MIX"):
    print(tag, "->", [s.kind for s in ablate(cfg, tag).stages])
