"""Convolutional autoencoder: mirrored encoder/decoder with an optional
classification head.

The layer stack is derived entirely from ModelConfig: each encoder channel
contributes conv(3x3, stride 1, pad 1) + relu + maxpool(2), the latent conv
adds channels without pooling, and the decoder mirrors the encoder with
nearest-neighbour upsampling before each conv. A final 1-channel conv with
a sigmoid pins reconstructions to the pixel domain. Parameters initialize
He-normal before relu and Glorot-uniform before sigmoid, from the config
seed alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .errors import ConfigError, DimensionError, UnsupportedOperationError
from .ops import ConvParams, F32, Tensor
from .rng import SeededRng

KERNEL = 3
PAD = 1


@dataclass
class ModelConfig:
    """Architecture description; every parameter shape follows from it."""

    input_size: int = 64
    encoder_channels: tuple[int, ...] = (16, 32)
    latent_channels: int = 8
    classifier_hidden: int | None = None
    seed: int = 0

    def __post_init__(self):
        self.encoder_channels = tuple(int(c) for c in self.encoder_channels)
        pools = len(self.encoder_channels)
        if self.input_size < 8:
            raise ConfigError(f"input_size must be >= 8, got {self.input_size}")
        if any(c < 1 for c in self.encoder_channels) or self.latent_channels < 1:
            raise ConfigError(
                f"channel counts must be >= 1, got {self.encoder_channels} / {self.latent_channels}")
        if self.input_size % (2 ** pools):
            raise ConfigError(
                f"input_size {self.input_size} is not divisible by 2^{pools} "
                f"(one factor of 2 per pooling stage)")
        if self.classifier_hidden is not None and self.classifier_hidden < 1:
            raise ConfigError(f"classifier_hidden must be >= 1, got {self.classifier_hidden}")

    def to_dict(self) -> dict:
        return {
            "input_size": self.input_size,
            "encoder_channels": list(self.encoder_channels),
            "latent_channels": self.latent_channels,
            "classifier_hidden": self.classifier_hidden,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {"input_size", "encoder_channels", "latent_channels", "classifier_hidden", "seed"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def _conv_shapes(config: ModelConfig) -> list[tuple[str, int, int, str]]:
    """(name, c_in, c_out, following activation) for every conv, in order."""
    layers = []
    c_in = 1
    for idx, c_out in enumerate(config.encoder_channels):
        layers.append((f"enc{idx}", c_in, c_out, "relu"))
        c_in = c_out
    layers.append(("latent", c_in, config.latent_channels, "relu"))
    c_in = config.latent_channels
    for idx, c_out in enumerate(reversed(config.encoder_channels)):
        layers.append((f"dec{idx}", c_in, c_out, "relu"))
        c_in = c_out
    layers.append(("out", c_in, 1, "sigmoid"))
    return layers


def _he_normal(rng: SeededRng, shape: tuple[int, ...], fan_in: int) -> Tensor:
    std = (2.0 / fan_in) ** 0.5
    n = int(np.prod(shape))
    return np.array([rng.normal() * std for _ in range(n)], dtype=F32).reshape(shape)


def _glorot_uniform(rng: SeededRng, shape: tuple[int, ...], fan_in: int, fan_out: int) -> Tensor:
    limit = (6.0 / (fan_in + fan_out)) ** 0.5
    n = int(np.prod(shape))
    return np.array([rng.uniform_in(-limit, limit) for _ in range(n)], dtype=F32).reshape(shape)


@dataclass
class AutoencoderModel:
    """Materialized parameters for a ModelConfig.

    params maps parameter names to float32 arrays in a fixed order; the
    order and shapes are derivable from the config alone, which is what the
    checkpoint format relies on.
    """

    config: ModelConfig
    params: dict[str, Tensor]
    metadata: dict = field(default_factory=dict)

    @property
    def parameter_count(self) -> int:
        return sum(int(p.size) for p in self.params.values())

    @property
    def latent_size(self) -> int:
        return self.config.input_size // (2 ** len(self.config.encoder_channels))

    def param_names(self) -> list[str]:
        return list(self.params)

    # ----------------------------------------------------------------- forward

    def forward(self, batch: Tensor) -> tuple[Tensor, Tensor, list]:
        """Run [B,1,H,W] (or [1,H,W]) through the autoencoder.

        Returns (reconstruction, latent activation, cache); the cache feeds
        backward() and holds each layer's saved inputs.
        """
        squeeze = batch.ndim == 3
        x = batch[None] if squeeze else batch
        size = self.config.input_size
        if x.ndim != 4 or x.shape[1] != 1 or x.shape[2] != size or x.shape[3] != size:
            raise DimensionError(
                f"batch shape {batch.shape} does not match model input [B,1,{size},{size}]")
        x = ops.as_tensor(x)
        cache: list[tuple] = []
        h = x
        for idx in range(len(self.config.encoder_channels)):
            h = self._conv_block(f"enc{idx}", h, cache)
            out, amax = ops.maxpool2d(h)
            cache.append(("pool", amax))
            h = out
        latent = self._conv_block("latent", h, cache)
        h = latent
        for idx in range(len(self.config.encoder_channels)):
            cache.append(("up", None))
            h = ops.upsample_nearest(h)
            h = self._conv_block(f"dec{idx}", h, cache)
        pre = ops.conv2d_forward(h, self._conv("out"))
        cache.append(("conv", "out", h))
        recon = ops.sigmoid(pre)
        cache.append(("sigmoid", recon))
        if squeeze:
            return recon[0], latent[0], cache
        return recon, latent, cache

    def _conv(self, name: str) -> ConvParams:
        return ConvParams(self.params[f"{name}.kernels"], self.params[f"{name}.bias"],
                          stride=1, padding=PAD)

    def _conv_block(self, name: str, h: Tensor, cache: list) -> Tensor:
        pre = ops.conv2d_forward(h, self._conv(name))
        cache.append(("conv", name, h))
        cache.append(("relu", name, pre))
        return ops.relu(pre)

    # ---------------------------------------------------------------- backward

    def backward(self, cache: list, grad_recon: Tensor,
                 grad_latent: Tensor | None = None) -> dict[str, Tensor]:
        """Gradients of the cached forward pass for every AE parameter.

        grad_recon is dLoss/dReconstruction; grad_latent, when given, is an
        extra gradient injected at the latent activation (the classifier
        head's contribution under a joint loss).
        """
        g = grad_recon if grad_recon.ndim == 4 else grad_recon[None]
        grads: dict[str, Tensor] = {}
        first_conv = "enc0" if self.config.encoder_channels else "latent"
        for entry in reversed(cache):
            kind = entry[0]
            if kind == "sigmoid":
                s = entry[1]
                g = ops.sigmoid_backward(g, s if s.ndim == 4 else s[None])
            elif kind == "relu":
                _, name, pre = entry
                if name == "latent" and grad_latent is not None:
                    # the head reads the latent activation; add its gradient
                    inj = grad_latent if grad_latent.ndim == 4 else grad_latent[None]
                    g = g + inj
                g = ops.relu_backward(g, pre)
            elif kind == "conv":
                _, name, saved = entry
                # the gradient wrt the input image itself is never consumed
                gi, gk, gb = ops.conv2d_backward(g, saved, self._conv(name),
                                                 need_input_grad=name != first_conv)
                grads[f"{name}.kernels"] = gk
                grads[f"{name}.bias"] = gb
                g = gi
            elif kind == "up":
                g = ops.upsample_nearest_backward(g)
            elif kind == "pool":
                g = ops.maxpool2d_backward(g, entry[1])
            else:  # pragma: no cover - cache entries are produced above
                raise ValueError(f"unknown cache entry {kind!r}")
        return grads

    # -------------------------------------------------------------- classifier

    def forward_classifier(self, latent: Tensor) -> tuple[Tensor, list]:
        """Anomaly probability from the latent activation.

        Global average pool over space, dense+relu, dense+sigmoid. Returns
        ([B] probabilities, cache).
        """
        if self.config.classifier_hidden is None:
            raise UnsupportedOperationError("model was built without a classifier head")
        squeeze = latent.ndim == 3
        z = latent[None] if squeeze else latent
        B, C, H, W = z.shape
        pooled = z.mean(axis=(2, 3), dtype=F32)
        h_pre = ops.dense(pooled, self.params["head0.weights"], self.params["head0.bias"])
        h = ops.relu(h_pre)
        logit = ops.dense(h, self.params["head1.weights"], self.params["head1.bias"])
        prob = ops.sigmoid(logit)
        cache = [pooled, h_pre, h, prob, (B, C, H, W)]
        out = prob[:, 0]
        return (out[0] if squeeze else out), cache

    def classifier_backward(self, grad_prob: Tensor, cache: list) -> tuple[dict[str, Tensor], Tensor]:
        """Head parameter gradients plus the gradient wrt the latent input."""
        pooled, h_pre, h, prob, (B, C, H, W) = cache
        g = np.asarray(grad_prob, dtype=F32).reshape(B, 1)
        g = ops.sigmoid_backward(g, prob)
        g, gw1, gb1 = ops.dense_backward(g, h, self.params["head1.weights"])
        g = ops.relu_backward(g, h_pre)
        g, gw0, gb0 = ops.dense_backward(g, pooled, self.params["head0.weights"])
        grad_latent = np.broadcast_to(g[:, :, None, None] * F32(1.0 / (H * W)),
                                      (B, C, H, W)).astype(F32)
        grads = {"head0.weights": gw0, "head0.bias": gb0,
                 "head1.weights": gw1, "head1.bias": gb1}
        return grads, np.ascontiguousarray(grad_latent)


def expected_param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Parameter names and shapes implied by a config, in build order."""
    shapes: dict[str, tuple[int, ...]] = {}
    for name, c_in, c_out, _ in _conv_shapes(config):
        shapes[f"{name}.kernels"] = (c_out, c_in, KERNEL, KERNEL)
        shapes[f"{name}.bias"] = (c_out,)
    if config.classifier_hidden is not None:
        shapes["head0.weights"] = (config.classifier_hidden, config.latent_channels)
        shapes["head0.bias"] = (config.classifier_hidden,)
        shapes["head1.weights"] = (1, config.classifier_hidden)
        shapes["head1.bias"] = (1,)
    return shapes


def build_model(config: ModelConfig) -> AutoencoderModel:
    """Initialize parameters from config.seed and return the model."""
    rng = SeededRng(config.seed)
    params: dict[str, Tensor] = {}
    for name, c_in, c_out, act in _conv_shapes(config):
        shape = (c_out, c_in, KERNEL, KERNEL)
        fan_in = c_in * KERNEL * KERNEL
        fan_out = c_out * KERNEL * KERNEL
        if act == "relu":
            params[f"{name}.kernels"] = _he_normal(rng, shape, fan_in)
        else:
            params[f"{name}.kernels"] = _glorot_uniform(rng, shape, fan_in, fan_out)
        params[f"{name}.bias"] = np.zeros(c_out, dtype=F32)
    if config.classifier_hidden is not None:
        c = config.latent_channels
        hid = config.classifier_hidden
        params["head0.weights"] = _he_normal(rng, (hid, c), c)
        params["head0.bias"] = np.zeros(hid, dtype=F32)
        params["head1.weights"] = _glorot_uniform(rng, (1, hid), hid, 1)
        params["head1.bias"] = np.zeros(1, dtype=F32)
    return AutoencoderModel(config=config, params=params)


def default_config(input_size: int = 64, seed: int = 0) -> ModelConfig:
    """The stock architecture: conv16/pool, conv32/pool, latent 8, mirrored."""
    return ModelConfig(input_size=input_size, seed=seed)
