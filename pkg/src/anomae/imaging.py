"""Image-space transforms: bilinear resize and training augmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .ops import F32, Tensor
from .rng import SeededRng


def resize_bilinear(img: Tensor, out_h: int, out_w: int) -> Tensor:
    """Resize [c, H, W] to [c, out_h, out_w] with half-pixel-center sampling.

    Source coordinate for output index d is (d + 0.5) * (in / out) - 0.5,
    clamped to [0, in - 1]; the four neighbours blend via two nested lerps,
    so equal sizes reproduce the input exactly and constants stay constant.
    """
    if out_h < 1 or out_w < 1:
        raise ValidationError(f"output size must be positive, got {out_h}x{out_w}")
    c, H, W = img.shape
    sy = np.clip((np.arange(out_h) + 0.5) * (H / out_h) - 0.5, 0.0, H - 1)
    sx = np.clip((np.arange(out_w) + 0.5) * (W / out_w) - 0.5, 0.0, W - 1)
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    y1 = np.minimum(y0 + 1, H - 1)
    x1 = np.minimum(x0 + 1, W - 1)
    fy = (sy - y0).astype(F32)[None, :, None]
    fx = (sx - x0).astype(F32)[None, None, :]
    v00 = img[:, y0[:, None], x0[None, :]]
    v01 = img[:, y0[:, None], x1[None, :]]
    v10 = img[:, y1[:, None], x0[None, :]]
    v11 = img[:, y1[:, None], x1[None, :]]
    top = v00 + fx * (v01 - v00)
    bot = v10 + fx * (v11 - v10)
    return np.ascontiguousarray(top + fy * (bot - top))


def hflip(img: Tensor) -> Tensor:
    """Mirror [c, H, W] left-right."""
    return np.ascontiguousarray(img[:, :, ::-1])


@dataclass
class AugmentPolicy:
    """Stochastic training transforms, applied flip -> brightness -> crop."""

    flip_prob: float = 0.5
    brightness: float = 0.1         # shift drawn uniformly from [-b, +b]
    crop_area: float = 0.9          # crop retains this fraction of the area

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValidationError(f"flip_prob must be in [0, 1], got {self.flip_prob}")
        if self.brightness < 0.0:
            raise ValidationError(f"brightness must be >= 0, got {self.brightness}")
        if not 0.0 < self.crop_area <= 1.0:
            raise ValidationError(f"crop_area must be in (0, 1], got {self.crop_area}")


DEFAULT_POLICY = AugmentPolicy()


def augment(pixels: Tensor, rng: SeededRng, policy: AugmentPolicy = DEFAULT_POLICY) -> Tensor:
    """Randomly transform one [c, H, W] image; the input is left untouched.

    Draws are consumed in a fixed order — flip decision, brightness shift,
    crop row, crop column — regardless of which transforms end up applied,
    so a seed pins the whole augmentation stream.
    """
    c, H, W = pixels.shape
    out = pixels
    if rng.uniform() < policy.flip_prob:
        out = hflip(out)
    shift = rng.uniform_in(-policy.brightness, policy.brightness)
    out = np.clip(out + F32(shift), F32(0.0), F32(1.0))
    scale = policy.crop_area ** 0.5
    ch = max(1, round(H * scale))
    cw = max(1, round(W * scale))
    y0 = rng.randint(H - ch + 1)
    x0 = rng.randint(W - cw + 1)
    if ch != H or cw != W:
        out = resize_bilinear(np.ascontiguousarray(out[:, y0:y0 + ch, x0:x0 + cw]), H, W)
    return np.ascontiguousarray(out.astype(F32, copy=False))
