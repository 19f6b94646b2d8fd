"""Reconstruction-error scoring, threshold calibration, ROC/AUC, reports.

The anomaly score of an image is its reconstruction MSE; "anomalous" is the
positive class everywhere, and an image is flagged anomalous exactly when
its error is strictly greater than the threshold.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import ImageRecord
from .errors import ValidationError
from .optim import mse_loss
from .ops import F32, Tensor

SCORE_BATCH = 16


@dataclass
class ScoreRecord:
    """Per-image reconstruction error with the image's ground-truth label."""

    id: str
    error: float
    label: str


@dataclass
class Histogram:
    """Uniform-width bins over [min, max]; the last bin is right-closed."""

    bin_edges: list[float]
    counts: list[int]


@dataclass
class ThresholdSpec:
    """A calibration method, its parameter, and the resolved error cutoff."""

    method: str
    param: float
    value: float


@dataclass
class RocCurve:
    points: list[tuple[float, float]]
    auc: float


def reconstruction_error(model, img: Tensor) -> float:
    """Mean squared reconstruction error of one [1,H,W] image (no augmentation)."""
    recon, _, _ = model.forward(img)
    return mse_loss(recon, img).value


def score_records(model, records: list[ImageRecord]) -> list[ScoreRecord]:
    """Score records in order; batching is internal and does not change results."""
    out = []
    for start in range(0, len(records), SCORE_BATCH):
        chunk = records[start:start + SCORE_BATCH]
        batch = np.stack([r.pixels for r in chunk])
        recon, _, _ = model.forward(batch)
        for r, rec, orig in zip(chunk, recon, batch):
            out.append(ScoreRecord(id=r.id, error=mse_loss(rec, orig).value, label=r.label))
    return out


def build_histogram(errors: list[float], n_bins: int = 50) -> Histogram:
    """Bin errors into n_bins uniform bins spanning [min, max].

    Bins are half-open [lo, hi) except the last, which is closed; a
    degenerate range widens to 1e-9 so every input still lands in a bin.
    """
    if not errors:
        raise ValidationError("cannot build a histogram from no errors")
    if n_bins < 1:
        raise ValidationError(f"n_bins must be >= 1, got {n_bins}")
    lo = float(min(errors))
    hi = float(max(errors))
    if hi == lo:
        hi = lo + 1e-9
    edges = [lo + (hi - lo) * k / n_bins for k in range(n_bins + 1)]
    edges[-1] = hi
    counts = [0] * n_bins
    for e in errors:
        idx = int(np.searchsorted(edges, e, side="right")) - 1
        counts[min(max(idx, 0), n_bins - 1)] += 1
    return Histogram(bin_edges=edges, counts=counts)


def calibrate_threshold(training_errors: list[float], method: str,
                        param: float) -> ThresholdSpec:
    """Resolve a decision threshold.

    fixed: the parameter itself. percentile: the lower-interpolation order
    statistic sorted[ceil(p*n) - 1] of the training errors. mean_plus_k_std:
    mean + k * population standard deviation.
    """
    if method == "fixed":
        return ThresholdSpec(method="fixed", param=float(param), value=float(param))
    if method not in ("percentile", "mean_plus_k_std"):
        raise ValidationError(f"unknown threshold method {method!r}")
    if not training_errors:
        raise ValidationError(f"method {method!r} needs a non-empty training error sample")
    if method == "percentile":
        p = float(param)
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"percentile must be in [0, 1], got {p}")
        s = sorted(training_errors)
        idx = min(max(math.ceil(p * len(s)) - 1, 0), len(s) - 1)
        return ThresholdSpec(method="percentile", param=p, value=float(s[idx]))
    arr = np.asarray(training_errors, dtype=np.float64)
    value = float(arr.mean() + float(param) * arr.std())
    return ThresholdSpec(method="mean_plus_k_std", param=float(param), value=value)


def classify(error: float, threshold: ThresholdSpec) -> str:
    """'anomalous' iff the error strictly exceeds the threshold."""
    return "anomalous" if error > threshold.value else "normal"


def roc_auc(scores: list[ScoreRecord]) -> RocCurve:
    """ROC over thresholds at each unique error value, descending.

    Anomalous is the positive class and higher error ranks more positive;
    tied scores advance TP and FP together, so the trapezoidal area equals
    the Mann-Whitney estimator with 0.5 credit for ties.
    """
    for s in scores:
        if s.label not in ("normal", "anomalous"):
            raise ValidationError(f"roc_auc needs normal/anomalous labels, got {s.label!r} for {s.id!r}")
    pos = sum(1 for s in scores if s.label == "anomalous")
    neg = len(scores) - pos
    if pos == 0 or neg == 0:
        raise ValidationError(f"roc_auc needs both classes, got {pos} anomalous / {neg} normal")
    ordered = sorted(scores, key=lambda s: -s.error)
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(ordered):
        j = i
        while j < len(ordered) and ordered[j].error == ordered[i].error:
            if ordered[j].label == "anomalous":
                tp += 1
            else:
                fp += 1
            j += 1
        points.append((fp / neg, tp / pos))
        i = j
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return RocCurve(points=points, auc=auc)


# ---------------------------------------------------------------------------
# report emission

SVG_WIDTH = 640
SVG_HEIGHT = 400
SVG_MARGIN_LEFT = 60
SVG_MARGIN_RIGHT = 20
SVG_MARGIN_TOP = 20
SVG_MARGIN_BOTTOM = 40
PLOT_W = SVG_WIDTH - SVG_MARGIN_LEFT - SVG_MARGIN_RIGHT
PLOT_H = SVG_HEIGHT - SVG_MARGIN_TOP - SVG_MARGIN_BOTTOM


def svg_x_domain(histogram: Histogram, threshold: ThresholdSpec) -> tuple[float, float]:
    """Horizontal data range of the histogram plot: bins plus the threshold."""
    lo = min(histogram.bin_edges[0], threshold.value)
    hi = max(histogram.bin_edges[-1], threshold.value)
    if hi == lo:
        hi = lo + 1e-9
    return lo, hi


def svg_x(value: float, lo: float, hi: float) -> float:
    """Data value -> pixel x under the report's affine plot transform."""
    return SVG_MARGIN_LEFT + (value - lo) / (hi - lo) * PLOT_W


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def _render_svg(histogram: Histogram, threshold: ThresholdSpec) -> str:
    lo, hi = svg_x_domain(histogram, threshold)
    peak = max(max(histogram.counts), 1)
    base_y = SVG_MARGIN_TOP + PLOT_H

    def ypix(count: int) -> float:
        return base_y - (count / peak) * PLOT_H

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<path d="M {SVG_MARGIN_LEFT} {SVG_MARGIN_TOP} V {base_y} H {SVG_MARGIN_LEFT + PLOT_W}" '
        f'fill="none" stroke="#333" stroke-width="1"/>',
    ]
    for k, count in enumerate(histogram.counts):
        x0 = svg_x(histogram.bin_edges[k], lo, hi)
        x1 = svg_x(histogram.bin_edges[k + 1], lo, hi)
        y = ypix(count)
        parts.append(
            f'<rect x="{x0:.6f}" y="{y:.6f}" width="{x1 - x0:.6f}" height="{base_y - y:.6f}" '
            f'fill="#4878a8" stroke="#123" stroke-width="0.5"/>')
    tx = svg_x(threshold.value, lo, hi)
    parts.append(
        f'<line x1="{tx:.6f}" y1="{SVG_MARGIN_TOP}" x2="{tx:.6f}" y2="{base_y}" '
        f'stroke="#c03020" stroke-width="1.5" stroke-dasharray="5,3"/>')
    parts.append(
        f'<text x="{tx + 4:.6f}" y="{SVG_MARGIN_TOP + 12}" font-size="11" fill="#c03020">'
        f'threshold {_fmt(threshold.value)}</text>')
    parts.append(
        f'<text x="{SVG_MARGIN_LEFT}" y="{SVG_HEIGHT - 8}" font-size="11" fill="#333">'
        f'{_fmt(lo)}</text>')
    parts.append(
        f'<text x="{SVG_MARGIN_LEFT + PLOT_W - 60}" y="{SVG_HEIGHT - 8}" font-size="11" fill="#333">'
        f'{_fmt(hi)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _write(path: Path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def emit_report(scores: list[ScoreRecord], histogram: Histogram,
                threshold: ThresholdSpec, roc: RocCurve, out_dir) -> list[Path]:
    """Write scores.csv, histogram.csv, roc.csv, summary.txt, histogram.svg.

    Files are rendered fully in memory and written via temp-name + rename;
    identical inputs produce byte-identical files.
    """
    if sum(histogram.counts) != len(scores):
        raise ValidationError(
            f"histogram counts sum to {sum(histogram.counts)} but there are {len(scores)} scores")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    lines = ["id,error,label,verdict"]
    tp = fp = tn = fn = 0
    for s in scores:
        verdict = classify(s.error, threshold)
        if s.label == "anomalous":
            tp, fn = (tp + 1, fn) if verdict == "anomalous" else (tp, fn + 1)
        elif s.label == "normal":
            fp, tn = (fp + 1, tn) if verdict == "anomalous" else (fp, tn + 1)
        lines.append(f"{s.id},{_fmt(s.error)},{s.label},{verdict}")
    scores_csv = "\n".join(lines) + "\n"

    hist_csv = "bin_lo,bin_hi,count\n" + "".join(
        f"{_fmt(histogram.bin_edges[k])},{_fmt(histogram.bin_edges[k + 1])},{histogram.counts[k]}\n"
        for k in range(len(histogram.counts)))
    roc_csv = "fpr,tpr\n" + "".join(f"{_fmt(x)},{_fmt(y)}\n" for x, y in roc.points)

    errors = [s.error for s in scores]
    summary = "".join([
        f"images: {len(scores)}\n",
        f"mean_error: {_fmt(float(np.mean(errors)))}\n",
        f"max_error: {_fmt(float(np.max(errors)))}\n",
        f"threshold_method: {threshold.method}\n",
        f"threshold_param: {_fmt(threshold.param)}\n",
        f"threshold_value: {_fmt(threshold.value)}\n",
        f"auc: {_fmt(roc.auc)}\n",
        f"true_positives: {tp}\n",
        f"false_positives: {fp}\n",
        f"true_negatives: {tn}\n",
        f"false_negatives: {fn}\n",
    ])

    outputs = {
        "scores.csv": scores_csv,
        "histogram.csv": hist_csv,
        "roc.csv": roc_csv,
        "summary.txt": summary,
        "histogram.svg": _render_svg(histogram, threshold),
    }
    written = []
    for name, text in outputs.items():
        path = out_dir / name
        _write(path, text)
        written.append(path)
    return written
