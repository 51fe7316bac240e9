"""Inpainting-mask constructions.

Free-form brush masks for context training, bounding-box masks for object
training, convolutional dilation of segmentation masks, and the fitting
ratio alpha = area(original) / area(dilated) that scores how tightly the
original segmentation fits its dilated mask (1 = exact fit).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from promptfill.errors import InvalidConfigError, MaskError

Box = tuple[int, int, int, int]  # (x0, y0, x1, y1), half-open


@dataclass(frozen=True)
class BrushParams:
    """Bounds for free-form stroke masks."""

    min_strokes: int = 1
    max_strokes: int = 4
    min_width: int = 2
    max_width: int = 8
    min_steps: int = 4
    max_steps: int = 20
    rect_prob: float = 0.3
    min_coverage: float = 0.05
    max_coverage: float = 0.50
    max_tries: int = 100


@dataclass(frozen=True)
class MaskPair:
    """An exact segmentation, its dilation, and the fitting ratio."""

    original: np.ndarray
    dilated: np.ndarray
    k: int
    it: int
    alpha: float


def _disk_offsets(radius: float) -> np.ndarray:
    r = int(np.ceil(radius))
    ys, xs = np.mgrid[-r : r + 1, -r : r + 1]
    keep = ys * ys + xs * xs <= radius * radius
    return np.stack([ys[keep], xs[keep]], axis=1)


def _stamp(mask: np.ndarray, y: int, x: int, offsets: np.ndarray) -> None:
    h, w = mask.shape
    pts = offsets + np.array([y, x])
    inside = (pts[:, 0] >= 0) & (pts[:, 0] < h) & (pts[:, 1] >= 0) & (pts[:, 1] < w)
    pts = pts[inside]
    mask[pts[:, 0], pts[:, 1]] = 1


def _one_attempt(h: int, w: int, rng: np.random.Generator, p: BrushParams) -> np.ndarray:
    mask = np.zeros((h, w), dtype=np.uint8)
    n_strokes = int(rng.integers(p.min_strokes, p.max_strokes + 1))
    for _ in range(n_strokes):
        if rng.random() < p.rect_prob:
            rw = int(rng.integers(2, max(3, w // 2 + 1)))
            rh = int(rng.integers(2, max(3, h // 2 + 1)))
            x0 = int(rng.integers(0, max(1, w - rw + 1)))
            y0 = int(rng.integers(0, max(1, h - rh + 1)))
            mask[y0 : y0 + rh, x0 : x0 + rw] = 1
            continue
        width = int(rng.integers(p.min_width, p.max_width + 1))
        offsets = _disk_offsets(width / 2.0)
        steps = int(rng.integers(p.min_steps, p.max_steps + 1))
        y = float(rng.uniform(0, h))
        x = float(rng.uniform(0, w))
        angle = float(rng.uniform(0, 2 * np.pi))
        for _ in range(steps):
            _stamp(mask, int(round(y)), int(round(x)), offsets)
            angle += float(rng.uniform(-0.8, 0.8))
            step_len = float(rng.uniform(1.0, max(2.0, width)))
            y = float(np.clip(y + step_len * np.sin(angle), 0, h - 1))
            x = float(np.clip(x + step_len * np.cos(angle), 0, w - 1))
        _stamp(mask, int(round(y)), int(round(x)), offsets)
    return mask


def random_freeform_mask(
    h: int, w: int, rng: np.random.Generator, params: BrushParams = BrushParams()
) -> np.ndarray:
    """Multi-stroke brush mask covering 5%-50% of the frame.

    Resamples internally until the coverage bounds are met; raises
    MaskError after ``params.max_tries`` failures.
    """
    for _ in range(params.max_tries):
        mask = _one_attempt(h, w, rng, params)
        cov = float(mask.mean())
        if params.min_coverage <= cov <= params.max_coverage:
            return mask
    raise MaskError(
        f"no mask within coverage [{params.min_coverage}, {params.max_coverage}] "
        f"after {params.max_tries} tries"
    )


def bbox_mask(box: Box, h: int, w: int) -> np.ndarray:
    """Axis-aligned filled rectangle mask from a half-open box."""
    x0, y0, x1, y1 = box
    if not (0 <= x0 < x1 <= w) or not (0 <= y0 < y1 <= h):
        raise MaskError(f"degenerate or out-of-range box {box} for {h}x{w}")
    mask = np.zeros((h, w), dtype=np.uint8)
    mask[y0:y1, x0:x1] = 1
    return mask


def dilate(m: np.ndarray, k: int, it: int) -> np.ndarray:
    """Convolution-based morphological dilation.

    Each iteration convolves with a k x k all-ones structuring element and
    thresholds at > 0; the image border clips the element. k must be odd,
    it >= 0 (it = 0 returns a copy).
    """
    if k < 1 or k % 2 == 0:
        raise InvalidConfigError(f"kernel size must be odd >= 1, got {k}")
    if it < 0:
        raise InvalidConfigError(f"iterations must be >= 0, got {it}")
    out = np.ascontiguousarray(m, dtype=np.uint8)
    if k == 1 or it == 0:
        return out.copy()
    kernel = np.ones((k, k), dtype=np.uint8)
    for _ in range(it):
        out = (convolve2d(out, kernel, mode="same") > 0).astype(np.uint8)
    return out


def fitting_ratio(original: np.ndarray, dilated: np.ndarray) -> float:
    """Area ratio alpha = area(original) / area(dilated) in (0, 1].

    Requires original to be a pixelwise subset of dilated and dilated to
    be nonempty; alpha = 1 exactly when the two masks coincide.
    """
    if original.shape != dilated.shape:
        raise MaskError("mask shapes differ")
    area_d = int(np.count_nonzero(dilated))
    if area_d == 0:
        raise MaskError("dilated mask is empty")
    if np.any((original > 0) & (dilated == 0)):
        raise MaskError("original mask is not a subset of the dilated mask")
    return float(np.count_nonzero(original)) / float(area_d)


def make_mask_pair(
    segmentation: np.ndarray,
    rng: np.random.Generator,
    kernel_sizes: tuple[int, ...] = (3, 5),
    max_iterations: int = 6,
    min_alpha: float = 0.05,
) -> MaskPair:
    """Draw (k, it), dilate a segmentation, and compute the fitting ratio.

    (k, it) are drawn jointly uniform; it is clamped downward until
    alpha >= min_alpha (it = 0 gives alpha = 1, so this terminates).
    """
    if np.count_nonzero(segmentation) == 0:
        raise MaskError("segmentation mask is empty")
    k = int(rng.choice(kernel_sizes))
    it = int(rng.integers(0, max_iterations + 1))
    while True:
        dilated = dilate(segmentation, k, it)
        alpha = fitting_ratio(segmentation, dilated)
        if alpha >= min_alpha or it == 0:
            return MaskPair(
                original=np.asarray(segmentation, dtype=np.uint8),
                dilated=dilated,
                k=k,
                it=it,
                alpha=alpha,
            )
        it -= 1


def mask_to_u8(mask: np.ndarray) -> np.ndarray:
    """Binary mask -> 8-bit grayscale image with values {0, 255}."""
    return (np.asarray(mask) > 0).astype(np.uint8) * 255


def u8_to_mask(img: np.ndarray) -> np.ndarray:
    """8-bit grayscale image -> binary mask, threshold at 128."""
    return (np.asarray(img) >= 128).astype(np.uint8)
