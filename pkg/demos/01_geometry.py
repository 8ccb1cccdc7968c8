"""
Box-aware geometric transforms
==============================

Rotations, flips, scale jittering and Simple-Mixup move the pixels and the
boxes together. This script builds a tiny synthetic logo, runs each transform
and checks that the box still hugs the logo.
"""

import numpy as np

from logoforge import Annotation, BBox, Sample, hflip, rotate90, scale_jitter, simple_mixup
from logoforge.geometry import MixupParams

# a white 12x6 "logo" on a black 40x30 canvas
img = np.zeros((30, 40, 3), np.uint8)
img[5:11, 8:20] = 255
s = Sample(img, [Annotation(1, 1, 1, BBox(8, 5, 12, 6))], image_id=1)


def footprint(sample):
    ys, xs = np.nonzero(sample.image[..., 0] >= 128)
    return int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1)


# a quarter turn clockwise swaps width and height
r = rotate90(s, 1)
print("rotate90:", r.image.shape[:2], r.annotations[0].bbox, "pixels at", footprint(r))

# flipping mirrors x about the image width
f = hflip(s)
print("hflip:   ", f.annotations[0].bbox, "pixels at", footprint(f))

# four quarter turns and two flips are exact identities
assert rotate90(rotate90(rotate90(r, 1), 1), 1) == s
assert hflip(f) == s

# scale jittering resamples bilinearly; the box follows the realised ratio
j = scale_jitter(s, 0.55)
print("jitter:  ", j.image.shape[:2], j.annotations[0].bbox, "pixels at", footprint(j))

# Simple-Mixup: jitter two samples separately, zero-pad, blend at 0.5
other = Sample(np.full((20, 50, 3), 200, np.uint8), [Annotation(7, 2, 3, BBox(30, 2, 10, 10))], image_id=2)
m = simple_mixup(s, other, MixupParams(alpha=0.5), ratios=(1.0, 1.0))
print("mixup:   ", m.image.shape[:2], [(a.category_id, a.bbox) for a in m.annotations])
print("blended pixel inside the logo:", m.image[6, 10], "(255 and 200 mixed)")
