"""Synthetic grayscale corpus: ellipse "lung fields" on a dark background.

A desk-scale stand-in for real radiographs. Normal images are two bright
ellipses with per-image jitter plus Gaussian pixel noise; anomalous images
add one bright disk centered somewhere inside an ellipse. Every image is
generated from its own child RNG stream derived from the master seed and
the record index, so corpora are bit-identical however generation is
scheduled.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .dataset import DatasetManifest
from .errors import ValidationError
from .ops import F32, Tensor
from .pgm import save_pgm
from .rng import SeededRng

BACKGROUND = 0.08
ELLIPSE_INTENSITY = 0.6
# (cx, cy, semi_x, semi_y) as fractions of the image size
ELLIPSES = ((0.32, 0.52, 0.13, 0.26), (0.68, 0.52, 0.13, 0.26))
CENTER_JITTER = 0.05        # +- fraction of size
RADIUS_JITTER = 0.10        # +- relative
INTENSITY_JITTER = 0.1      # +- absolute
EDGE_SOFTNESS = 0.15        # width of the boundary ramp, in implicit-f units
NOISE_SIGMA = 0.02
DISK_RADIUS = (0.08, 0.16)  # fraction of size
DISK_INTENSITY = 0.4


def _render_base(rng: SeededRng, size: int) -> tuple[Tensor, list[tuple[float, float, float, float]]]:
    """Noisy two-ellipse image plus the jittered ellipse geometry."""
    img = np.full((size, size), F32(BACKGROUND), dtype=F32)
    ys, xs = np.mgrid[0:size, 0:size]
    placed = []
    for cx, cy, ax, ay in ELLIPSES:
        ecx = cx * size + rng.uniform_in(-CENTER_JITTER, CENTER_JITTER) * size
        ecy = cy * size + rng.uniform_in(-CENTER_JITTER, CENTER_JITTER) * size
        eax = ax * size * (1.0 + rng.uniform_in(-RADIUS_JITTER, RADIUS_JITTER))
        eay = ay * size * (1.0 + rng.uniform_in(-RADIUS_JITTER, RADIUS_JITTER))
        val = ELLIPSE_INTENSITY + rng.uniform_in(-INTENSITY_JITTER, INTENSITY_JITTER)
        # antialiased boundary: linear ramp of ~1.5 px around the implicit
        # curve f = 1, radiograph-soft rather than a hard step
        f = ((xs - ecx) / eax) ** 2 + ((ys - ecy) / eay) ** 2
        alpha = np.clip((1.0 - f) / EDGE_SOFTNESS * 0.5 + 0.5, 0.0, 1.0)
        img = np.maximum(img, (BACKGROUND + (val - BACKGROUND) * alpha).astype(F32))
        placed.append((ecx, ecy, eax, eay))
    noise = np.array([rng.normal() for _ in range(size * size)], dtype=F32).reshape(size, size)
    img = np.clip(img + noise * F32(NOISE_SIGMA), F32(0.0), F32(1.0))
    return img[None], placed


def render_normal_image(rng: SeededRng, size: int) -> Tensor:
    """One normal [1, size, size] image."""
    img, _ = _render_base(rng, size)
    return img


def render_anomalous_image(rng: SeededRng, size: int) -> Tensor:
    """A normal base image plus one bright disk inside an ellipse.

    The base consumes exactly the draws of render_normal_image, then the
    disk takes four more: ellipse choice, angle, radial position, radius.
    """
    img, placed = _render_base(rng, size)
    ecx, ecy, eax, eay = placed[rng.randint(len(placed))]
    theta = rng.uniform_in(0.0, 2.0 * math.pi)
    t = rng.uniform() ** 0.5  # uniform over the ellipse area
    px = ecx + t * eax * math.cos(theta)
    py = ecy + t * eay * math.sin(theta)
    radius = rng.uniform_in(DISK_RADIUS[0], DISK_RADIUS[1]) * size
    ys, xs = np.mgrid[0:size, 0:size]
    disk = (xs - px) ** 2 + (ys - py) ** 2 <= radius ** 2
    out = img.copy()
    out[0][disk] = np.clip(out[0][disk] + F32(DISK_INTENSITY), F32(0.0), F32(1.0))
    return out


def gen_synth(n_normal: int, n_anomalous: int, size: int = 64, seed: int = 0,
              out_dir=".") -> DatasetManifest:
    """Write a synthetic corpus and its manifest.csv to out_dir."""
    if n_normal < 0 or n_anomalous < 0:
        raise ValidationError(f"image counts must be >= 0, got {n_normal}/{n_anomalous}")
    if size < 16:
        raise ValidationError(f"size must be >= 16, got {size}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    master = SeededRng(seed)
    entries = []
    for i in range(n_normal):
        name = f"normal_{i:04d}.pgm"
        save_pgm(render_normal_image(master.spawn(i), size), out_dir / name)
        entries.append((name, "normal"))
    for i in range(n_anomalous):
        name = f"anomalous_{i:04d}.pgm"
        save_pgm(render_anomalous_image(master.spawn(n_normal + i), size), out_dir / name)
        entries.append((name, "anomalous"))
    manifest = DatasetManifest(out_dir, entries)
    manifest.save(out_dir / "manifest.csv")
    return manifest
