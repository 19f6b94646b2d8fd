"""Run configuration: the JSON document driving `anomae train`.

Four sections — data, model, train, eval — each with defaults. Unknown
keys are rejected so typos fail loudly, and the fully materialized
("effective") config is echoed next to every checkpoint so a run is
self-describing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConfigError
from .model import ModelConfig
from .trainer import TrainConfig

_DATA_DEFAULTS = {
    "manifest": None,
    "image_size": 64,
    "split_ratios": [0.8, 0.1, 0.1],
    "split_seed": 0,
}
_MODEL_DEFAULTS = {
    "encoder_channels": [16, 32],
    "latent_channels": 8,
    "classifier_hidden": None,
    "seed": 0,
}
_TRAIN_DEFAULTS = {
    "epochs": 100,
    "batch_size": 16,
    "optimizer": "adam",
    "lr": 1e-3,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "lambda_cls": 0.0,
    "patience": None,
    "augment": True,
    "seed": 0,
}
_EVAL_DEFAULTS = {
    "threshold_method": "percentile",
    "threshold_param": 0.95,
    "n_bins": 50,
}


def _merge(section: str, defaults: dict, given: dict) -> dict:
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}' section: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(given)
    return merged


@dataclass
class RunConfig:
    data: dict
    model: dict
    train: dict
    eval: dict

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError(f"run config must be a JSON object, got {type(doc).__name__}")
        unknown = set(doc) - {"data", "model", "train", "eval"}
        if unknown:
            raise ConfigError(f"unknown top-level section(s): {sorted(unknown)}")
        for section in doc:
            if not isinstance(doc[section], dict):
                raise ConfigError(f"section '{section}' must be an object")
        return cls(
            data=_merge("data", _DATA_DEFAULTS, doc.get("data", {})),
            model=_merge("model", _MODEL_DEFAULTS, doc.get("model", {})),
            train=_merge("train", _TRAIN_DEFAULTS, doc.get("train", {})),
            eval=_merge("eval", _EVAL_DEFAULTS, doc.get("eval", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"run config is not valid JSON: {exc}") from exc

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            input_size=int(self.data["image_size"]),
            encoder_channels=tuple(self.model["encoder_channels"]),
            latent_channels=int(self.model["latent_channels"]),
            classifier_hidden=self.model["classifier_hidden"],
            seed=int(self.model["seed"]),
        )

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(
            epochs=int(t["epochs"]), batch_size=int(t["batch_size"]),
            optimizer=t["optimizer"], lr=float(t["lr"]), beta1=float(t["beta1"]),
            beta2=float(t["beta2"]), epsilon=float(t["epsilon"]),
            lambda_cls=float(t["lambda_cls"]), patience=t["patience"],
            augment=bool(t["augment"]), seed=int(t["seed"]),
        )

    def effective_json(self) -> str:
        doc = {"data": self.data, "model": self.model, "train": self.train, "eval": self.eval}
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
