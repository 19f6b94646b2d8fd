"""Command-line interface: gen-synth, train, calibrate, score, eval.

Exit codes: 0 success, 1 runtime or I/O failure, 2 configuration or
validation error, 3 alert raised (`score --alert` saw an error above the
threshold). With identical inputs and seeds every subcommand produces
byte-identical files and stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .dataset import DatasetManifest, ImageRecord, load_records, split_manifest
from .errors import (AnomaeError, ConfigError, DimensionError, PgmParseError,
                     ValidationError)
from .evaluate import (ThresholdSpec, build_histogram, calibrate_threshold, classify,
                       emit_report, reconstruction_error, roc_auc, score_records)
from .imaging import resize_bilinear
from .pgm import load_pgm_file
from .runconfig import RunConfig
from .synth import gen_synth
from .trainer import train

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_ALERT = 3

_METHOD_ALIASES = {"fixed": "fixed", "percentile": "percentile",
                   "meanstd": "mean_plus_k_std", "mean_plus_k_std": "mean_plus_k_std"}


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anomae",
        description="Convolutional-autoencoder anomaly detection for grayscale PGM images.")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("gen-synth", formatter_class=fmt,
                       help="generate a synthetic labeled corpus")
    p.add_argument("--out", required=True, help="output directory for images and manifest.csv")
    p.add_argument("--normals", type=int, required=True, help="number of normal images")
    p.add_argument("--anomalies", type=int, required=True, help="number of anomalous images")
    p.add_argument("--size", type=int, default=64, help="image side length in pixels")
    p.add_argument("--seed", type=int, default=0, help="master seed for generation")

    p = sub.add_parser("train", formatter_class=fmt,
                       help="train an autoencoder from a run-config JSON")
    p.add_argument("--config", required=True, help="run-config JSON file")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--history", default=None, help="optional per-epoch history CSV path")

    p = sub.add_parser("calibrate", formatter_class=fmt,
                       help="resolve a decision threshold from normal images")
    p.add_argument("--ckpt", required=True, help="trained checkpoint")
    p.add_argument("--manifest", required=True, help="manifest of calibration images")
    p.add_argument("--method", required=True, choices=["fixed", "percentile", "meanstd"],
                   help="threshold rule")
    p.add_argument("--param", type=float, required=True,
                   help="fixed value, percentile in [0,1], or std multiplier")
    p.add_argument("--out", required=True, help="threshold JSON output path")

    p = sub.add_parser("score", formatter_class=fmt,
                       help="score images and print id, error, verdict per line")
    p.add_argument("--ckpt", required=True, help="trained checkpoint")
    p.add_argument("--input", nargs="+", required=True,
                   help="PGM files and/or manifest CSVs to score")
    p.add_argument("--threshold", required=True, help="threshold JSON from calibrate")
    p.add_argument("--alert", action="store_true", default=False,
                   help="print ALERT lines and exit 3 if any image is anomalous")

    p = sub.add_parser("eval", formatter_class=fmt,
                       help="score a labeled manifest and write the report set")
    p.add_argument("--ckpt", required=True, help="trained checkpoint")
    p.add_argument("--manifest", required=True, help="manifest with normal and anomalous entries")
    p.add_argument("--threshold", required=True, help="threshold JSON from calibrate")
    p.add_argument("--out", required=True, help="report output directory")
    p.add_argument("--bins", type=int, default=50, help="histogram bin count")
    return parser


def _load_threshold(path: str) -> ThresholdSpec:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        method = _METHOD_ALIASES[doc["method"]]
        return ThresholdSpec(method=method, param=float(doc["param"]), value=float(doc["value"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"threshold JSON {path} needs method/param/value fields: {exc}") from exc


def _write_text(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _cmd_gen_synth(args) -> int:
    for flag, value in (("--normals", args.normals), ("--anomalies", args.anomalies)):
        if value < 0:
            print(f"error: {flag} must be non-negative, got {value}", file=sys.stderr)
            return EXIT_CONFIG
    if args.size < 16:
        print(f"error: --size must be at least 16, got {args.size}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = gen_synth(args.normals, args.anomalies, size=args.size, seed=args.seed,
                         out_dir=args.out)
    print(f"manifest: {Path(args.out) / 'manifest.csv'}")
    print(f"normals: {args.normals}")
    print(f"anomalies: {args.anomalies}")
    return EXIT_OK


def _cmd_train(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        cfg = RunConfig.from_json(fh.read())
    if not cfg.data["manifest"]:
        raise ConfigError("data.manifest is required for training")
    manifest_path = Path(args.config).parent / cfg.data["manifest"]
    if not manifest_path.is_file():
        raise ConfigError(f"data.manifest points to a missing file: {manifest_path}")
    manifest = DatasetManifest.load(manifest_path)
    ratios = tuple(float(r) for r in cfg.data["split_ratios"])
    if len(ratios) != 3:
        raise ConfigError(f"data.split_ratios needs 3 entries, got {cfg.data['split_ratios']}")
    m_train, m_val, m_test = split_manifest(manifest, ratios, int(cfg.data["split_seed"]))

    image_size = int(cfg.data["image_size"])
    train_cfg = cfg.train_config()
    train_records = load_records(m_train, image_size)
    val_manifest = m_val if train_cfg.lambda_cls > 0 else m_val.filter("normal")
    if not val_manifest.entries:  # tiny corpora: fall back to monitoring the train split
        val_manifest = m_train
    val_records = load_records(val_manifest, image_size)

    from .model import build_model  # local import keeps CLI startup light
    model = build_model(cfg.model_config())
    model, history = train(model, train_records, val_records, train_cfg)

    final = history.records[-1]
    save_checkpoint(model, args.out, metadata={
        "epochs": len(history.records),
        "final_loss": final.train_loss,
        "seed": train_cfg.seed,
    })
    _write_text(f"{args.out}.config.json", cfg.effective_json())
    for name, m in (("train", m_train), ("val", m_val), ("test", m_test)):
        m.save(f"{args.out}.split-{name}.csv")
    if args.history:
        _write_text(args.history, history.to_csv())
    print(f"checkpoint: {args.out}")
    print(f"effective_config: {args.out}.config.json")
    print(f"epochs_run: {len(history.records)}")
    print(f"final_train_loss: {_fmt(final.train_loss)}")
    print(f"final_val_mse: {_fmt(final.val_mse)}")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    method = _METHOD_ALIASES[args.method]
    if method == "percentile" and not 0.0 <= args.param <= 1.0:
        print(f"error: --param must be in [0, 1] for percentile, got {args.param}",
              file=sys.stderr)
        return EXIT_CONFIG
    if method == "fixed":
        spec = calibrate_threshold([], "fixed", args.param)
    else:
        model = load_checkpoint(args.ckpt)
        manifest = DatasetManifest.load(args.manifest)
        non_normal = [p for p, label in manifest.entries if label != "normal"]
        if non_normal:
            raise ValidationError(
                f"data-driven calibration needs normal-only entries; found {non_normal[:3]}")
        records = load_records(manifest, model.config.input_size)
        errors = [s.error for s in score_records(model, records)]
        spec = calibrate_threshold(errors, method, args.param)
    doc = {"method": spec.method, "param": spec.param, "value": spec.value}
    _write_text(args.out, json.dumps(doc, sort_keys=True) + "\n")
    print(f"threshold: {_fmt(spec.value)}")
    return EXIT_OK


def _gather_score_records(inputs: list[str], image_size: int) -> list[ImageRecord]:
    import numpy as np

    records = []
    for item in inputs:
        if item.endswith(".csv"):
            manifest = DatasetManifest.load(item)
            records.extend(load_records(manifest, image_size))
        else:
            pixels = load_pgm_file(item)
            if pixels.shape[1:] != (image_size, image_size):
                pixels = np.clip(resize_bilinear(pixels, image_size, image_size), 0.0, 1.0)
            records.append(ImageRecord(id=item, pixels=pixels, label="unlabeled"))
    return records


def _cmd_score(args) -> int:
    model = load_checkpoint(args.ckpt)
    threshold = _load_threshold(args.threshold)
    records = _gather_score_records(args.input, model.config.input_size)
    alerts = 0
    for score in score_records(model, records):
        verdict = classify(score.error, threshold)
        print(f"{score.id}\t{_fmt(score.error)}\t{verdict}")
        if verdict == "anomalous" and args.alert:
            print(f"ALERT {score.id} {_fmt(score.error)}")
            alerts += 1
    return EXIT_ALERT if alerts else EXIT_OK


def _cmd_eval(args) -> int:
    model = load_checkpoint(args.ckpt)
    threshold = _load_threshold(args.threshold)
    if args.bins < 1:
        print(f"error: --bins must be at least 1, got {args.bins}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = DatasetManifest.load(args.manifest)
    labels = manifest.labels_present()
    if "unlabeled" in labels or labels != {"normal", "anomalous"}:
        raise ValidationError(
            f"eval needs a manifest with both normal and anomalous entries, found {sorted(labels)}")
    records = load_records(manifest, model.config.input_size)
    scores = score_records(model, records)
    histogram = build_histogram([s.error for s in scores], n_bins=args.bins)
    roc = roc_auc(scores)
    emit_report(scores, histogram, threshold, roc, args.out)
    print(f"report: {args.out}")
    print(f"AUC: {_fmt(roc.auc)}")
    return EXIT_OK


_DISPATCH = {
    "gen-synth": _cmd_gen_synth,
    "train": _cmd_train,
    "calibrate": _cmd_calibrate,
    "score": _cmd_score,
    "eval": _cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    try:
        return _DISPATCH[args.command](args)
    except (ConfigError, ValidationError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, PgmParseError, CheckpointError, AnomaeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def run() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    run()
