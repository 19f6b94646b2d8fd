"""Labeled image records, on-disk manifests, and train/val/test splitting.

A manifest is a UTF-8 CSV with header ``path,label`` and LF line endings;
paths are relative to the manifest's directory. Labels are ``normal``,
``anomalous``, or ``unlabeled``. Autoencoder training consumes only
normal-labeled entries, enforced structurally by split_manifest.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .imaging import resize_bilinear
from .ops import Tensor
from .pgm import load_pgm_file
from .rng import SeededRng

LABELS = ("normal", "anomalous", "unlabeled")


@dataclass
class ImageRecord:
    """One grayscale image with its label; pixels are [1, H, W] in [0, 1]."""

    id: str
    pixels: Tensor
    label: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValidationError(f"label {self.label!r} not in {LABELS}")
        if self.pixels.ndim != 3 or self.pixels.shape[0] != 1:
            raise ValidationError(f"pixels must be [1,H,W], got shape {self.pixels.shape}")
        _, h, w = self.pixels.shape
        if h < 8 or w < 8:
            raise ValidationError(f"image {self.id!r} is {h}x{w}; minimum is 8x8")
        lo, hi = float(self.pixels.min()), float(self.pixels.max())
        if lo < 0.0 or hi > 1.0:
            raise ValidationError(f"image {self.id!r} has pixels outside [0,1]: [{lo}, {hi}]")


@dataclass
class DatasetManifest:
    """Listing of (relative path, label) pairs rooted at a directory."""

    root: Path
    entries: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self.root = Path(self.root)
        seen = set()
        for path, label in self.entries:
            if label not in LABELS:
                raise ValidationError(f"label {label!r} for {path!r} not in {LABELS}")
            if path in seen:
                raise ValidationError(f"duplicate manifest path {path!r}")
            seen.add(path)

    def labels_present(self) -> set[str]:
        return {label for _, label in self.entries}

    def filter(self, label: str) -> "DatasetManifest":
        return DatasetManifest(self.root, [e for e in self.entries if e[1] == label])

    def save(self, path) -> None:
        """Write the manifest; entry paths are rewritten relative to `path`."""
        path = Path(path)
        dest = path.parent if str(path.parent) else Path(".")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["path", "label"])
        for rel, label in self.entries:
            writer.writerow([os.path.relpath(self.root / rel, dest), label])
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["path", "label"]:
            raise ValidationError(f"manifest {path} must start with header 'path,label'")
        entries = []
        for row in rows[1:]:
            if len(row) != 2:
                raise ValidationError(f"manifest {path} row {row!r} must have 2 fields")
            entries.append((row[0], row[1]))
        return cls(path.parent, entries)


def load_records(manifest: DatasetManifest, image_size: int | None = None) -> list[ImageRecord]:
    """Load every manifest entry, resizing to image_size x image_size if set."""
    records = []
    for rel, label in manifest.entries:
        pixels = load_pgm_file(manifest.root / rel)
        if image_size is not None and pixels.shape[1:] != (image_size, image_size):
            pixels = np.clip(resize_bilinear(pixels, image_size, image_size), 0.0, 1.0)
        records.append(ImageRecord(id=rel, pixels=pixels, label=label))
    return records


def split_manifest(manifest: DatasetManifest, ratios: tuple[float, float, float],
                   seed: int) -> tuple[DatasetManifest, DatasetManifest, DatasetManifest]:
    """Deterministic train/val/test split.

    Normal entries are shuffled by the seed and split by the ratios (floor
    allocation, remainder to train). Anomalous and unlabeled entries never
    enter the training split; they are divided between val and test in
    proportion to those two ratios.
    """
    r_train, r_val, r_test = ratios
    if min(ratios) < 0:
        raise ValidationError(f"split ratios must be non-negative, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"split ratios must sum to 1.0, got {ratios}")
    normals = [e for e in manifest.entries if e[1] == "normal"]
    others = [e for e in manifest.entries if e[1] != "normal"]
    if not normals:
        raise ValidationError("cannot split a manifest with no normal-labeled entries")
    if others and r_val + r_test <= 0:
        raise ValidationError("anomalous/unlabeled entries need a non-zero val or test ratio")

    rng = SeededRng(seed)
    rng.shuffle(normals)
    rng.shuffle(others)

    # the 1e-9 nudge keeps decimal ratios like 0.29*100 from flooring low
    n = len(normals)
    n_train = math.floor(r_train * n + 1e-9)
    n_val = math.floor(r_val * n + 1e-9)
    n_test = math.floor(r_test * n + 1e-9)
    n_train += n - (n_train + n_val + n_test)

    m = len(others)
    m_val = math.floor(m * r_val / (r_val + r_test) + 1e-9) if others else 0

    train = normals[:n_train]
    val = normals[n_train:n_train + n_val] + others[:m_val]
    test = normals[n_train + n_val:] + others[m_val:]
    return (DatasetManifest(manifest.root, train),
            DatasetManifest(manifest.root, val),
            DatasetManifest(manifest.root, test))
