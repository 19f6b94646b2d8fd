"""Losses and parameter-update rules.

Both losses reduce by the mean, so per-image values are comparable across
image sizes. All arithmetic is float32; scalar coefficients are computed in
double precision and rounded once before touching parameter arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ValidationError
from .ops import F32, Tensor

# probabilities are clamped away from {0,1} before any log
BCE_CLAMP = 1e-7


@dataclass
class LossValue:
    """Scalar loss plus its gradient with respect to the prediction."""

    value: float
    grad: Tensor


def mse_loss(pred: Tensor, target: Tensor) -> LossValue:
    """Mean squared error: value (1/N) sum (p-t)^2, grad (2/N)(p-t)."""
    if pred.shape != target.shape:
        raise DimensionError(f"pred shape {pred.shape} does not match target shape {target.shape}")
    if pred.size == 0:
        raise ValidationError("mse_loss needs at least one element")
    diff = (pred - target).astype(F32, copy=False)
    value = float(np.mean(diff * diff, dtype=F32))
    grad = diff * F32(2.0 / diff.size)
    return LossValue(value, grad)


def bce_loss(prob: Tensor, label: Tensor) -> LossValue:
    """Binary cross-entropy against {0,1} labels.

    Probabilities are clamped to [1e-7, 1-1e-7] for both the value and the
    gradient, so the result stays finite for saturated predictions.
    """
    if prob.shape != label.shape:
        raise DimensionError(f"prob shape {prob.shape} does not match label shape {label.shape}")
    if prob.size == 0:
        raise ValidationError("bce_loss needs at least one element")
    y = np.asarray(label, dtype=F32)
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("bce_loss labels must be exactly 0 or 1")
    p = np.clip(prob, F32(BCE_CLAMP), F32(1.0 - BCE_CLAMP)).astype(F32, copy=False)
    value = float(-np.mean(y * np.log(p) + (F32(1.0) - y) * np.log(F32(1.0) - p), dtype=F32))
    grad = (p - y) / (p * (F32(1.0) - p)) * F32(1.0 / p.size)
    return LossValue(value, grad.astype(F32, copy=False))


def sgd_step(params: list[Tensor], grads: list[Tensor], lr: float) -> list[Tensor]:
    """Plain gradient descent: p <- p - lr * g. Returns new arrays."""
    if lr <= 0:
        raise ValidationError(f"learning rate must be positive, got {lr}")
    _check_pairs(params, grads)
    step = F32(lr)
    return [p - step * g for p, g in zip(params, grads)]


@dataclass
class AdamState:
    """First/second moment estimates, mirroring the parameter shapes."""

    m: list[Tensor]
    v: list[Tensor]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def init(cls, params: list[Tensor], beta1: float = 0.9, beta2: float = 0.999,
             epsilon: float = 1e-8) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params],
                   t=0, beta1=beta1, beta2=beta2, epsilon=epsilon)


def adam_step(state: AdamState, params: list[Tensor], grads: list[Tensor],
              lr: float) -> tuple[list[Tensor], AdamState]:
    """One Adam update with bias correction; epsilon sits outside the sqrt."""
    if lr <= 0:
        raise ValidationError(f"learning rate must be positive, got {lr}")
    _check_pairs(params, grads)
    if len(state.m) != len(params):
        raise DimensionError(f"Adam state tracks {len(state.m)} tensors, got {len(params)} params")
    t = state.t + 1
    b1, b2 = F32(state.beta1), F32(state.beta2)
    c1 = F32(1.0 / (1.0 - state.beta1 ** t))
    c2 = F32(1.0 / (1.0 - state.beta2 ** t))
    eps = F32(state.epsilon)
    step = F32(lr)
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if m.shape != p.shape:
            raise DimensionError(f"Adam moment shape {m.shape} does not match param shape {p.shape}")
        m = b1 * m + (F32(1.0) - b1) * g
        v = b2 * v + (F32(1.0) - b2) * (g * g)
        m_hat = m * c1
        v_hat = v * c2
        new_params.append(p - step * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(m=new_m, v=new_v, t=t, beta1=state.beta1,
                                 beta2=state.beta2, epsilon=state.epsilon)


def _check_pairs(params: list[Tensor], grads: list[Tensor]) -> None:
    if len(params) != len(grads):
        raise DimensionError(f"{len(params)} params but {len(grads)} grads")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise DimensionError(f"param shape {p.shape} does not match grad shape {g.shape}")
