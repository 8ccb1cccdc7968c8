"""
Colour and texture augmentations
================================

Strong colour jitter stacks inversion, channel swaps, brightness, contrast,
saturation, hue, blur and two kinds of noise, each gated by its own
probability. RandAugment draws N ops at a shared magnitude.
"""

import numpy as np

from logoforge import ColorJitterParams, RandAugmentParams, rand_augment, strong_color_jitter
from logoforge.photometric import adjust_bcsh, gaussian_blur, gaussian_noise, impulse_noise

rng = np.random.default_rng(0)
img = np.zeros((48, 64, 3), np.uint8)
img[..., 0] = np.linspace(0, 255, 64, dtype=np.uint8)  # red ramp
img[12:36, 16:48, 2] = 220                             # blue block

# individual operations are deterministic given their parameters
print("desaturated pure red:", adjust_bcsh(np.array([[[255, 0, 0]]], np.uint8), saturation=0.0)[0, 0])
print("hue +120 on pure red:", adjust_bcsh(np.array([[[255, 0, 0]]], np.uint8), hue=120.0)[0, 0])
print("blur keeps the mean:", img.mean().round(2), gaussian_blur(img, 1.5).mean().round(2))

gray = np.full((64, 64, 3), 128, np.uint8)
print("noise std at 10:", (gaussian_noise(gray, 10, rng).astype(float) - 128).std().round(2))
hit = (impulse_noise(gray, 0.1, rng) != gray).any(axis=-1).mean()
print("impulse fraction at 0.1:", hit.round(3))

# the composite draws everything from one generator, so a seed pins it down
p = ColorJitterParams(p_invert=0.1, p_swap=0.5, p_blur=0.5, p_gauss_noise=0.5, p_impulse=0.5)
a = strong_color_jitter(img, p, np.random.default_rng(42))
b = strong_color_jitter(img, p, np.random.default_rng(42))
print("same seed, same output:", np.array_equal(a, b))

# one RandAugment op at magnitude 10 of 30
for seed in range(3):
    out = rand_augment(img, RandAugmentParams(n_ops=1, magnitude=10), np.random.default_rng(seed))
    print(f"seed {seed}: mean abs change {np.abs(out.astype(int) - img).mean():.1f}")
