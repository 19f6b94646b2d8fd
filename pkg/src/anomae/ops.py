"""Dense float32 tensor kernels: convolution, pooling, upsampling, dense,
activations, each with an explicit backward pass.

Tensors are C-contiguous float32 numpy arrays. Images and activations are
[channels, height, width]; every op also accepts a leading batch axis and
returns results with matching rank. All kernels are pure and deterministic:
convolution accumulates per output element in a fixed order (input channel,
then kernel row, then kernel column, each partial sum rounded to float32),
max-pool ties break to the first window position in row-major order, and
relu'(0) is 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionError, ValidationError

Tensor = np.ndarray
F32 = np.float32


def as_tensor(data) -> Tensor:
    """Coerce to a C-contiguous float32 array."""
    return np.ascontiguousarray(np.asarray(data, dtype=F32))


def _as_batch(x: Tensor, rank: int, what: str) -> tuple[Tensor, bool]:
    """Promote a single item to a batch of one; report whether to squeeze."""
    if x.ndim == rank:
        return x[None], True
    if x.ndim == rank + 1:
        return x, False
    raise DimensionError(f"{what} must have {rank} or {rank + 1} dims, got shape {x.shape}")


@dataclass
class ConvParams:
    """Convolution weights: kernels [c_out, c_in, kH, kW], bias [c_out].

    Zero padding, symmetric; correlation convention (kernels not flipped).
    """

    kernels: Tensor
    bias: Tensor
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        self.kernels = as_tensor(self.kernels)
        self.bias = as_tensor(self.bias)
        if self.kernels.ndim != 4:
            raise DimensionError(f"kernels must be 4-d [c_out,c_in,kH,kW], got shape {self.kernels.shape}")
        if self.bias.shape != (self.kernels.shape[0],):
            raise DimensionError(
                f"bias shape {self.bias.shape} does not match kernels {self.kernels.shape}")
        if self.stride < 1:
            raise ValidationError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ValidationError(f"padding must be >= 0, got {self.padding}")


def _pad2d(x4: Tensor, padding: int) -> Tensor:
    if padding == 0:
        return np.ascontiguousarray(x4)
    B, C, H, W = x4.shape
    out = np.zeros((B, C, H + 2 * padding, W + 2 * padding), dtype=F32)
    out[:, :, padding:padding + H, padding:padding + W] = x4
    return out


def _conv_out_hw(H: int, W: int, p: ConvParams) -> tuple[int, int]:
    kH, kW = p.kernels.shape[2], p.kernels.shape[3]
    span_h = H + 2 * p.padding - kH
    span_w = W + 2 * p.padding - kW
    if span_h < 0 or span_w < 0:
        raise DimensionError(
            f"kernel {p.kernels.shape} exceeds padded input {H + 2 * p.padding}x{W + 2 * p.padding}")
    if span_h % p.stride or span_w % p.stride:
        raise DimensionError(
            f"input {H}x{W} with padding {p.padding} not divisible by stride {p.stride} "
            f"for kernel {p.kernels.shape}")
    return span_h // p.stride + 1, span_w // p.stride + 1


def conv2d_forward(x: Tensor, p: ConvParams) -> Tensor:
    """Correlate [c_in,H,W] (or a batch) with p.kernels -> [c_out,H',W']."""
    x4, squeeze = _as_batch(x, 3, "conv input")
    if x4.shape[1] != p.kernels.shape[1]:
        raise DimensionError(f"input shape {x.shape} does not match kernels {p.kernels.shape}")
    Ho, Wo = _conv_out_hw(x4.shape[2], x4.shape[3], p)
    xp = _pad2d(x4, p.padding)
    out = np.empty((x4.shape[0], p.kernels.shape[0], Ho, Wo), dtype=F32)
    if p.stride == 1:
        _kernels.conv_fwd_s1(xp, p.kernels, p.bias, out)
    else:
        _kernels.conv_fwd_gen(xp, p.kernels, p.bias, out, p.stride)
    return out[0] if squeeze else out


def conv2d_backward(grad_out: Tensor, x: Tensor, p: ConvParams,
                    need_input_grad: bool = True) -> tuple[Tensor, Tensor, Tensor]:
    """Gradients of sum(grad_out * conv2d_forward(x, p)) wrt x, kernels, bias.

    need_input_grad=False skips the input gradient (returned as None) for
    callers at the bottom of a network where it would go unused.
    """
    x4, squeeze = _as_batch(x, 3, "conv input")
    g4, gsqueeze = _as_batch(grad_out, 3, "conv grad_out")
    if squeeze != gsqueeze:
        raise DimensionError(f"grad_out shape {grad_out.shape} does not match input shape {x.shape}")
    Ho, Wo = _conv_out_hw(x4.shape[2], x4.shape[3], p)
    cout, cin, kH, kW = p.kernels.shape
    if g4.shape != (x4.shape[0], cout, Ho, Wo):
        raise DimensionError(
            f"grad_out shape {grad_out.shape} does not match conv output "
            f"{(x4.shape[0], cout, Ho, Wo) if not squeeze else (cout, Ho, Wo)}")
    g4 = np.ascontiguousarray(g4)
    xp = _pad2d(x4, p.padding)

    grad_kernels = np.zeros((cout, cin, kH, kW), dtype=F32)
    if p.stride == 1:
        grad_bias = np.zeros(cout, dtype=F32)
        _kernels.conv_bwd_kernels_s1(xp, g4, grad_kernels, grad_bias)
    else:
        grad_bias = g4.sum(axis=(0, 2, 3), dtype=F32)
        _kernels.conv_bwd_kernels_gen(xp, g4, grad_kernels, p.stride)

    if not need_input_grad:
        return None, grad_kernels, grad_bias

    # grad wrt input: dilate grad_out by the stride, then full-correlate with
    # the transposed, spatially flipped kernels (the interior of a stride-1
    # correlation, offset by the padding).
    B = x4.shape[0]
    if p.stride == 1:
        dil = g4
    else:
        dil = np.zeros((B, cout, (Ho - 1) * p.stride + 1, (Wo - 1) * p.stride + 1), dtype=F32)
        dil[:, :, ::p.stride, ::p.stride] = g4
    dpad = np.zeros((B, cout, dil.shape[2] + 2 * (kH - 1), dil.shape[3] + 2 * (kW - 1)), dtype=F32)
    dpad[:, :, kH - 1:kH - 1 + dil.shape[2], kW - 1:kW - 1 + dil.shape[3]] = dil
    kt = np.ascontiguousarray(p.kernels.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
    grad_input = np.empty((B, cin, x4.shape[2], x4.shape[3]), dtype=F32)
    _kernels.conv_bwd_input_s1(dpad, kt, grad_input, p.padding)

    if squeeze:
        return grad_input[0], grad_kernels, grad_bias
    return grad_input, grad_kernels, grad_bias


def maxpool2d(x: Tensor, window: int = 2, stride: int = 2) -> tuple[Tensor, Tensor]:
    """2x2/stride-2 max pool; returns (output, argmax cache for backward).

    The cache stores, per output element, the index of the first maximal
    position in row-major window order.
    """
    if window != 2 or stride != 2:
        raise ValidationError(f"only window=2, stride=2 pooling is supported, got {window}/{stride}")
    x4, squeeze = _as_batch(x, 3, "pool input")
    B, C, H, W = x4.shape
    if H % 2 or W % 2:
        raise DimensionError(f"pool input must have even height and width, got shape {x.shape}")
    out = np.empty((B, C, H // 2, W // 2), dtype=F32)
    # cache: index of the first maximum per window, row-major order (0..3)
    idx = np.empty((B, C, H // 2, W // 2), dtype=np.uint8)
    _kernels.maxpool2x2(np.ascontiguousarray(x4), out, idx)
    cache = idx if not squeeze else idx[0]
    return (out[0] if squeeze else out), cache


def maxpool2d_backward(grad_out: Tensor, argmax_cache: Tensor) -> Tensor:
    """Route each gradient element to its cached argmax position."""
    g4, squeeze = _as_batch(grad_out, 3, "pool grad_out")
    idx = argmax_cache[None] if squeeze else argmax_cache
    if idx.shape != g4.shape:
        raise DimensionError(f"grad_out shape {grad_out.shape} does not match cache {argmax_cache.shape}")
    B, C, Ho, Wo = g4.shape
    grad_input = np.zeros((B, C, 2 * Ho, 2 * Wo), dtype=F32)
    _kernels.maxpool2x2_backward(np.ascontiguousarray(g4), np.ascontiguousarray(idx), grad_input)
    return grad_input[0] if squeeze else grad_input


def upsample_nearest(x: Tensor, factor: int = 2) -> Tensor:
    """Replicate each pixel into a factor x factor block."""
    if factor < 1:
        raise ValidationError(f"upsample factor must be >= 1, got {factor}")
    x4, squeeze = _as_batch(x, 3, "upsample input")
    out = np.ascontiguousarray(np.repeat(np.repeat(x4, factor, axis=2), factor, axis=3))
    return out[0] if squeeze else out


def upsample_nearest_backward(grad_out: Tensor, factor: int = 2) -> Tensor:
    """Sum the gradient over each replicated block."""
    g4, squeeze = _as_batch(grad_out, 3, "upsample grad_out")
    B, C, H, W = g4.shape
    if H % factor or W % factor:
        raise DimensionError(f"grad_out shape {grad_out.shape} not divisible by factor {factor}")
    if factor == 2:
        grad_input = np.empty((B, C, H // 2, W // 2), dtype=F32)
        _kernels.upsample2_backward(np.ascontiguousarray(g4), grad_input)
    else:
        grad_input = g4.reshape(B, C, H // factor, factor, W // factor, factor).sum(axis=(3, 5), dtype=F32)
        grad_input = np.ascontiguousarray(grad_input)
    return grad_input[0] if squeeze else grad_input


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Affine map weights @ x + bias for a vector x [n] (or batch [B,n])."""
    xb, squeeze = _as_batch(x, 1, "dense input")
    if weights.ndim != 2 or xb.shape[1] != weights.shape[1] or bias.shape != (weights.shape[0],):
        raise DimensionError(
            f"dense shapes do not conform: input {x.shape}, weights {weights.shape}, bias {bias.shape}")
    out = (xb @ weights.T + bias).astype(F32, copy=False)
    return out[0] if squeeze else out


def dense_backward(grad_out: Tensor, x: Tensor, weights: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    """Gradients of sum(grad_out * dense(x, w, b)) wrt x, weights, bias."""
    xb, squeeze = _as_batch(x, 1, "dense input")
    gb, gsqueeze = _as_batch(grad_out, 1, "dense grad_out")
    if squeeze != gsqueeze or gb.shape != (xb.shape[0], weights.shape[0]):
        raise DimensionError(f"grad_out shape {grad_out.shape} does not match weights {weights.shape}")
    grad_input = (gb @ weights).astype(F32, copy=False)
    grad_weights = (gb.T @ xb).astype(F32, copy=False)
    grad_bias = gb.sum(axis=0, dtype=F32)
    return (grad_input[0] if squeeze else grad_input), grad_weights, grad_bias


def relu(x: Tensor) -> Tensor:
    return np.maximum(x, F32(0.0))


def relu_backward(grad_out: Tensor, x: Tensor) -> Tensor:
    """Pass gradient where x > 0; the derivative at exactly 0 is 0."""
    if grad_out.shape != x.shape:
        raise DimensionError(f"grad_out shape {grad_out.shape} does not match input {x.shape}")
    return np.where(x > 0, grad_out, F32(0.0))


def sigmoid(x: Tensor) -> Tensor:
    """Numerically stable logistic: never exponentiates a positive value."""
    t = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + t), t / (1.0 + t)).astype(F32, copy=False)


def sigmoid_backward(grad_out: Tensor, s: Tensor) -> Tensor:
    """Backward through sigmoid given its output s: grad * s * (1 - s)."""
    if grad_out.shape != s.shape:
        raise DimensionError(f"grad_out shape {grad_out.shape} does not match output {s.shape}")
    return (grad_out * s * (F32(1.0) - s)).astype(F32, copy=False)
