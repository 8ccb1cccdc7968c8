"""Colour-space augmentations on ``(H, W, 3)`` uint8 images.

None of these touch boxes. Randomised ops take an explicit
``numpy.random.Generator`` and use no other source of randomness.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from PIL import Image, ImageEnhance, ImageOps
from scipy import ndimage

from .datamodel import check_image

PERMUTATIONS: tuple[tuple[int, int, int], ...] = tuple(itertools.permutations(range(3)))  # type: ignore[assignment]

_LUMA = np.array([0.299, 0.587, 0.114])


def _to_uint8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def invert(img: np.ndarray) -> np.ndarray:
    check_image(img)
    return 255 - img


def swap_channels(img: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    """Output channel ``i`` is input channel ``perm[i]``."""
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != [0, 1, 2]:
        raise ValueError(f"{perm} is not a permutation of (0, 1, 2)")
    return np.ascontiguousarray(img[..., list(perm)])


def _luma(r: np.ndarray, g: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _LUMA[0] * r + _LUMA[1] * g + _LUMA[2] * b


def _rotate_hue(r: np.ndarray, g: np.ndarray, b: np.ndarray,
                degrees: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shift HSV hue of float RGB planes (any scale) by ``degrees``.

    Value and chroma are unchanged by a hue shift, so the HSV round trip
    reduces to the piecewise-linear hue-to-RGB formula.
    """
    v = np.maximum(np.maximum(r, g), b)
    delta = v - np.minimum(np.minimum(r, g), b)
    safe = np.where(delta > 0, delta, 1.0)
    # first max wins: r, then g, then b
    h6 = np.where(v == r, (g - b) / safe,
                  np.where(v == g, 2.0 + (b - r) / safe, 4.0 + (r - g) / safe))
    h6 += degrees / 60.0
    h6 %= 6.0
    out = []
    for n in (5.0, 3.0, 1.0):
        k = (h6 + n) % 6.0
        w = np.minimum(k, 4.0 - k)
        np.clip(w, 0.0, 1.0, out=w)
        out.append(v - delta * w)
    return out[0], out[1], out[2]


def adjust_bcsh(img: np.ndarray, brightness: float = 1.0, contrast: float = 1.0,
                saturation: float = 1.0, hue: float = 0.0) -> np.ndarray:
    """Brightness, contrast, saturation, then hue (degrees), clipping after each."""
    check_image(img)
    if min(brightness, contrast, saturation) < 0:
        raise ValueError("brightness, contrast and saturation factors must be >= 0")
    if not -180.0 <= hue <= 180.0:
        raise ValueError(f"hue shift must lie in [-180, 180] degrees, got {hue}")
    if (brightness, contrast, saturation, hue) == (1.0, 1.0, 1.0, 0.0):
        return img.copy()

    # channel planes are much faster to work on than interleaved pixels
    planes = [img[..., c].astype(np.float64) for c in range(3)]
    if brightness != 1.0:
        planes = [np.clip(p * brightness, 0, 255) for p in planes]
    if contrast != 1.0:
        mean = float(_luma(*planes).mean())
        planes = [np.clip((p - mean) * contrast + mean, 0, 255) for p in planes]
    if saturation != 1.0:
        gray = _luma(*planes)
        planes = [np.clip(gray + saturation * (p - gray), 0, 255) for p in planes]
    if hue != 0.0:
        planes = [np.clip(p, 0, 255) for p in _rotate_hue(*planes, hue)]
    return _to_uint8(np.stack(planes, axis=-1))


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = math.ceil(3 * sigma)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, radius ``ceil(3 * sigma)``, mirrored borders."""
    check_image(img)
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img.copy()
    k = gaussian_kernel(sigma)
    x = img.astype(np.float64)
    # scipy "reflect" mirrors about the edge including the edge pixel: (c b a | a b c)
    x = ndimage.correlate1d(x, k, axis=0, mode="reflect")
    x = ndimage.correlate1d(x, k, axis=1, mode="reflect")
    return _to_uint8(x)


def gaussian_noise(img: np.ndarray, std: float, rng: np.random.Generator) -> np.ndarray:
    check_image(img)
    if std < 0:
        raise ValueError(f"noise std must be >= 0, got {std}")
    if std == 0:
        return img.copy()
    noise = rng.normal(0.0, std, size=img.shape)
    return _to_uint8(img + noise)


def impulse_noise(img: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Salt-and-pepper noise: each selected pixel becomes pure black or pure white."""
    check_image(img)
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"impulse fraction must lie in [0, 1], got {fraction}")
    if fraction == 0:
        return img.copy()
    h, w = img.shape[:2]
    hit = rng.random((h, w)) < fraction
    white = rng.random((h, w)) < 0.5
    out = img.copy()
    out[hit & white] = 255
    out[hit & ~white] = 0
    return out


def _check_range(name: str, lo_hi: tuple[float, float], minimum: float | None = None) -> None:
    lo, hi = lo_hi
    if lo > hi:
        raise ValueError(f"{name}: range minimum {lo} exceeds maximum {hi}")
    if minimum is not None and lo < minimum:
        raise ValueError(f"{name}: values must be >= {minimum}, got {lo}")


@dataclass(frozen=True)
class ColorJitterParams:
    """Knobs for :func:`strong_color_jitter`.

    The defaults are this package's choices; ranges are sampled uniformly.
    """

    p_invert: float = 0.1
    p_swap: float = 0.2
    p_blur: float = 0.2
    p_gauss_noise: float = 0.2
    p_impulse: float = 0.2
    brightness: tuple[float, float] = (0.6, 1.4)
    contrast: tuple[float, float] = (0.6, 1.4)
    saturation: tuple[float, float] = (0.6, 1.4)
    hue: tuple[float, float] = (-18.0, 18.0)
    blur_sigma: tuple[float, float] = (0.5, 2.0)
    noise_std: tuple[float, float] = (2.0, 15.0)
    impulse_fraction: tuple[float, float] = (0.01, 0.05)

    def __post_init__(self) -> None:
        for name in ("p_invert", "p_swap", "p_blur", "p_gauss_noise", "p_impulse"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        for name in ("brightness", "contrast", "saturation", "hue", "blur_sigma",
                     "noise_std", "impulse_fraction"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        _check_range("brightness", self.brightness, 0.0)
        _check_range("contrast", self.contrast, 0.0)
        _check_range("saturation", self.saturation, 0.0)
        _check_range("hue", self.hue, -180.0)
        if self.hue[1] > 180.0:
            raise ValueError("hue: values must be <= 180")
        _check_range("blur_sigma", self.blur_sigma, 0.0)
        _check_range("noise_std", self.noise_std, 0.0)
        _check_range("impulse_fraction", self.impulse_fraction, 0.0)
        if self.impulse_fraction[1] > 1.0:
            raise ValueError("impulse_fraction: values must be <= 1")

    @classmethod
    def disabled(cls) -> ColorJitterParams:
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (0.0, 0.0))


def strong_color_jitter(img: np.ndarray, params: ColorJitterParams,
                        rng: np.random.Generator) -> np.ndarray:
    """Invert, BCSH jitter, channel swap, then blur / Gaussian noise / impulse noise.

    The number of draws taken from ``rng`` is fixed for a given set of gate
    outcomes, so the stream layout does not depend on image content.
    """
    p = params
    out = check_image(img)
    if rng.random() < p.p_invert:
        out = invert(out)
    b = rng.uniform(*p.brightness)
    c = rng.uniform(*p.contrast)
    s = rng.uniform(*p.saturation)
    h = rng.uniform(*p.hue)
    out = adjust_bcsh(out, b, c, s, h)
    if rng.random() < p.p_swap:
        out = swap_channels(out, PERMUTATIONS[rng.integers(len(PERMUTATIONS))])
    if rng.random() < p.p_blur:
        out = gaussian_blur(out, rng.uniform(*p.blur_sigma))
    if rng.random() < p.p_gauss_noise:
        out = gaussian_noise(out, rng.uniform(*p.noise_std), rng)
    if rng.random() < p.p_impulse:
        out = impulse_noise(out, rng.uniform(*p.impulse_fraction), rng)
    return out if out is not img else img.copy()


# RandAugment ---------------------------------------------------------------

MAX_MAGNITUDE = 30


def _pil(img: np.ndarray) -> Image.Image:
    return Image.fromarray(np.ascontiguousarray(img), "RGB")


def _enhance(enhancer: type) -> Callable[[np.ndarray, float, np.random.Generator], np.ndarray]:
    def op(img: np.ndarray, level: float, rng: np.random.Generator) -> np.ndarray:
        sign = 1.0 if rng.random() < 0.5 else -1.0
        factor = 1.0 + sign * 0.9 * level
        return np.asarray(enhancer(_pil(img)).enhance(factor))
    return op


def _autocontrast(img: np.ndarray, level: float, rng: np.random.Generator) -> np.ndarray:
    return np.asarray(ImageOps.autocontrast(_pil(img)))


def _equalize(img: np.ndarray, level: float, rng: np.random.Generator) -> np.ndarray:
    return np.asarray(ImageOps.equalize(_pil(img)))


def _posterize(img: np.ndarray, level: float, rng: np.random.Generator) -> np.ndarray:
    bits = 8 - int(math.floor(4 * level + 0.5))
    return np.asarray(ImageOps.posterize(_pil(img), bits))


def _solarize(img: np.ndarray, level: float, rng: np.random.Generator) -> np.ndarray:
    # level 0 -> threshold 256 (no-op), level 1 -> threshold 0 (full inversion)
    threshold = 256 - int(math.floor(256 * level + 0.5))
    return np.where(img >= threshold, 255 - img, img).astype(np.uint8)


RANDAUGMENT_OPS: dict[str, Callable[[np.ndarray, float, np.random.Generator], np.ndarray]] = {
    "autocontrast": _autocontrast,
    "equalize": _equalize,
    "posterize": _posterize,
    "solarize": _solarize,
    "color": _enhance(ImageEnhance.Color),
    "contrast": _enhance(ImageEnhance.Contrast),
    "brightness": _enhance(ImageEnhance.Brightness),
    "sharpness": _enhance(ImageEnhance.Sharpness),
}

DEFAULT_POOL: tuple[str, ...] = tuple(RANDAUGMENT_OPS)


@dataclass(frozen=True)
class RandAugmentParams:
    n_ops: int = 1
    magnitude: int = 10
    op_pool: tuple[str, ...] = field(default=DEFAULT_POOL)

    def __post_init__(self) -> None:
        object.__setattr__(self, "op_pool", tuple(self.op_pool))
        if self.n_ops < 0:
            raise ValueError(f"n_ops must be >= 0, got {self.n_ops}")
        if not 0 <= self.magnitude <= MAX_MAGNITUDE:
            raise ValueError(f"magnitude must lie in [0, {MAX_MAGNITUDE}], got {self.magnitude}")
        if self.n_ops > 0 and not self.op_pool:
            raise ValueError("op_pool must be non-empty when n_ops > 0")
        unknown = [name for name in self.op_pool if name not in RANDAUGMENT_OPS]
        if unknown:
            raise ValueError(f"unknown RandAugment ops {unknown}; known: {sorted(RANDAUGMENT_OPS)}")


def rand_augment(img: np.ndarray, params: RandAugmentParams,
                 rng: np.random.Generator) -> np.ndarray:
    """Apply ``n_ops`` ops drawn with replacement from the pool at a shared magnitude.

    Each op maps ``magnitude / 30`` linearly onto its own strength range.
    """
    check_image(img)
    level = params.magnitude / MAX_MAGNITUDE
    out = img
    for _ in range(params.n_ops):
        name = params.op_pool[rng.integers(len(params.op_pool))]
        out = RANDAUGMENT_OPS[name](out, level, rng)
    return np.ascontiguousarray(out) if out is not img else img.copy()
