"""Deterministic mini-batch training with validation tracking.

Each epoch reshuffles the training set with a generator derived from
(seed, epoch index), applies augmentation to training batches only, and
records the epoch's mean train loss and validation reconstruction MSE.
With a patience setting, training stops once validation MSE has failed to
improve by at least 1e-6 for that many consecutive epochs, and the
best-validation parameters are restored.

The loss is (1 - lambda_cls) * reconstruction MSE + lambda_cls * BCE of
the classifier head; lambda_cls = 0 trains the autoencoder alone and never
touches head parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import ImageRecord
from .errors import ConfigError, DimensionError, ValidationError
from .evaluate import score_records
from .imaging import DEFAULT_POLICY, augment
from .model import AutoencoderModel
from .optim import AdamState, adam_step, bce_loss, mse_loss, sgd_step
from .ops import F32
from .rng import SeededRng

MIN_IMPROVEMENT = 1e-6


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 16
    optimizer: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    lambda_cls: float = 0.0
    patience: int | None = None
    augment: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.lambda_cls <= 1.0:
            raise ConfigError(f"lambda_cls must be in [0, 1], got {self.lambda_cls}")
        if self.patience is not None and self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_mse: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_mse"]
        for r in self.records:
            lines.append(f"{r.epoch},{format(r.train_loss, '.9g')},{format(r.val_mse, '.9g')}")
        return "\n".join(lines) + "\n"


def _check_records(records: list[ImageRecord], size: int, what: str) -> None:
    for r in records:
        if r.pixels.shape != (1, size, size):
            raise DimensionError(
                f"{what} record {r.id!r} has shape {r.pixels.shape}, model wants (1, {size}, {size})")


def evaluate_mean_mse(model: AutoencoderModel, records: list[ImageRecord]) -> float:
    """Mean per-image reconstruction MSE, no augmentation, manifest order."""
    if not records:
        raise ValidationError("cannot evaluate on an empty dataset")
    errors = np.array([s.error for s in score_records(model, records)], dtype=np.float64)
    return float(errors.mean())


def train(model: AutoencoderModel, train_set: list[ImageRecord],
          val_set: list[ImageRecord], cfg: TrainConfig) -> tuple[AutoencoderModel, TrainHistory]:
    """Train in place; returns the model and its per-epoch history."""
    if not train_set:
        raise ValidationError("training set is empty")
    if not val_set:
        raise ValidationError("validation set is empty")
    if cfg.lambda_cls > 0 and model.config.classifier_hidden is None:
        raise ConfigError("lambda_cls > 0 requires a model with a classifier head")
    if cfg.lambda_cls == 0:
        bad = [r.id for r in train_set if r.label != "normal"]
        if bad:
            raise ValidationError(f"pure reconstruction training needs all-normal data; got {bad[:3]}")
        bad_val = [r.id for r in val_set if r.label != "normal"]
        if bad_val:
            raise ValidationError(f"validation must be all-normal when lambda_cls=0; got {bad_val[:3]}")
    else:
        bad = [r.id for r in train_set + val_set if r.label == "unlabeled"]
        if bad:
            raise ValidationError(f"joint training needs labeled data; got unlabeled {bad[:3]}")
    size = model.config.input_size
    _check_records(train_set, size, "train")
    _check_records(val_set, size, "val")

    trainable = [n for n in model.params
                 if cfg.lambda_cls > 0 or not n.startswith("head")]
    adam = AdamState.init([model.params[n] for n in trainable],
                          cfg.beta1, cfg.beta2, cfg.epsilon) if cfg.optimizer == "adam" else None

    pixels = np.stack([r.pixels for r in train_set])
    labels = np.array([1.0 if r.label == "anomalous" else 0.0 for r in train_set], dtype=F32)
    n = len(train_set)
    lam = cfg.lambda_cls

    history = TrainHistory()
    best_val = float("inf")
    best_params: dict | None = None
    streak = 0

    for epoch in range(cfg.epochs):
        rng = SeededRng(cfg.seed).spawn(epoch)
        order = list(range(n))
        rng.shuffle(order)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if cfg.augment:
                batch = np.stack([augment(pixels[i], rng, DEFAULT_POLICY) for i in idx])
            else:
                batch = pixels[idx]
            recon, latent, cache = model.forward(batch)
            rec = mse_loss(recon, batch)
            loss_value = (1.0 - lam) * rec.value
            grad_recon = rec.grad * F32(1.0 - lam)
            head_grads: dict = {}
            grad_latent = None
            if lam > 0:
                probs, head_cache = model.forward_classifier(latent)
                cls = bce_loss(probs, labels[idx])
                loss_value += lam * cls.value
                head_grads, grad_latent = model.classifier_backward(cls.grad * F32(lam), head_cache)
            grads = model.backward(cache, grad_recon, grad_latent)
            grads.update(head_grads)
            plist = [model.params[name] for name in trainable]
            glist = [grads[name] for name in trainable]
            if adam is not None:
                plist, adam = adam_step(adam, plist, glist, cfg.lr)
            else:
                plist = sgd_step(plist, glist, cfg.lr)
            for name, new in zip(trainable, plist):
                model.params[name] = new
            loss_sum += loss_value * len(idx)

        val_mse = evaluate_mean_mse(model, val_set)
        history.records.append(EpochRecord(epoch=epoch, train_loss=loss_sum / n, val_mse=val_mse))

        if cfg.patience is not None:
            if val_mse < best_val - MIN_IMPROVEMENT:
                best_val = val_mse
                best_params = {k: v.copy() for k, v in model.params.items()}
                streak = 0
            else:
                streak += 1
                if streak >= cfg.patience:
                    break

    if cfg.patience is not None and best_params is not None:
        model.params = best_params
    return model, history
