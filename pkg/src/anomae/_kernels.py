"""JIT-compiled convolution loops.

All kernels accumulate in float32 with a fixed order so results are
bit-identical across runs and across batch sizes. The forward kernels add
contributions per output element in channel-major order, then kernel row,
then kernel column; every intermediate rounds to float32 (no FMA, no
reassociation — numba's default strict FP semantics).

The ``_s1`` variants assume stride 1, which lets LLVM vectorize the inner
row loop; the ``_gen`` variants take the stride as a runtime argument and
are several times slower. Callers pick the variant; results agree bitwise.

Arrays must be C-contiguous float32; slicing non-contiguous views into
these kernels would compile a second, slower specialization.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def conv_fwd_s1(xp, k, bias, out):
    """Stride-1 correlation. xp: [B,Cin,Hp,Wp] pre-padded, out: [B,Cout,Ho,Wo]."""
    B, Cin, Hp, Wp = xp.shape
    Cout, _, kH, kW = k.shape
    _, _, Ho, Wo = out.shape
    for n in range(B):
        for o in range(Cout):
            plane = out[n, o]
            b = bias[o]
            for y in range(Ho):
                for x in range(Wo):
                    plane[y, x] = b
            for c in range(Cin):
                for i in range(kH):
                    for j in range(kW):
                        kk = k[o, c, i, j]
                        for y in range(Ho):
                            row = xp[n, c, y + i]
                            orow = plane[y]
                            for x in range(Wo):
                                orow[x] = orow[x] + row[x + j] * kk
    return out


@njit(cache=True)
def conv_fwd_gen(xp, k, bias, out, stride):
    """General-stride correlation; same accumulation order as conv_fwd_s1."""
    B, Cin, Hp, Wp = xp.shape
    Cout, _, kH, kW = k.shape
    _, _, Ho, Wo = out.shape
    for n in range(B):
        for o in range(Cout):
            plane = out[n, o]
            b = bias[o]
            for y in range(Ho):
                for x in range(Wo):
                    plane[y, x] = b
            for c in range(Cin):
                for i in range(kH):
                    for j in range(kW):
                        kk = k[o, c, i, j]
                        for y in range(Ho):
                            row = xp[n, c, y * stride + i]
                            orow = plane[y]
                            for x in range(Wo):
                                orow[x] = orow[x] + row[x * stride + j] * kk
    return out


@njit(cache=True, fastmath={"contract", "reassoc", "nsz", "arcp"})
def conv_bwd_input_s1(dpad, kt, gi, pad):
    """Gradient wrt the unpadded input: stride-1 correlation of the padded,
    dilated output gradient with the transposed+flipped kernels, evaluated
    only over the interior that maps back to real input pixels.

    Not order-pinned (only the forward pass carries the oracle contract), so
    FMA contraction and reassociation are allowed; results are still
    deterministic run-to-run on a given machine.
    """
    B, Cout, Hp, Wp = dpad.shape
    Cin, _, kH, kW = kt.shape  # kt is [c_in, c_out, kH, kW], flipped spatially
    _, _, Ho, Wo = gi.shape
    for n in range(B):
        for c in range(Cin):
            plane = gi[n, c]
            for y in range(Ho):
                for x in range(Wo):
                    plane[y, x] = 0.0
            for o in range(Cout):
                for i in range(kH):
                    for j in range(kW):
                        kk = kt[c, o, i, j]
                        for y in range(Ho):
                            # slice keeps the pad offset out of the inner
                            # index; a third index term defeats vectorization
                            row = dpad[n, o, y + pad + i, pad:]
                            orow = plane[y]
                            for x in range(Wo):
                                orow[x] = orow[x] + row[x + j] * kk
    return gi


@njit(cache=True, fastmath={"contract", "reassoc", "nsz", "arcp"})
def conv_bwd_kernels_s1(xp, go, gk, gb):
    """Kernel and bias gradients, stride 1, in one pass over the output grad.

    Reduction order is unspecified (vectorized with reassociation) but fixed
    for a given build, so training stays bit-reproducible across runs.
    """
    B, Cin, Hp, Wp = xp.shape
    _, Cout, Ho, Wo = go.shape
    _, _, kH, kW = gk.shape
    acc = np.zeros(Wo, dtype=np.float32)
    for o in range(Cout):
        bsum = np.float32(0.0)
        for n in range(B):
            for y in range(Ho):
                grow = go[n, o, y]
                for x in range(Wo):
                    bsum += grow[x]
        gb[o] = bsum
        for c in range(Cin):
            for i in range(kH):
                for j in range(kW):
                    for x in range(Wo):
                        acc[x] = 0.0
                    for n in range(B):
                        for y in range(Ho):
                            grow = go[n, o, y]
                            xrow = xp[n, c, y + i]
                            for x in range(Wo):
                                acc[x] = acc[x] + grow[x] * xrow[x + j]
                    s = np.float32(0.0)
                    for x in range(Wo):
                        s += acc[x]
                    gk[o, c, i, j] = s
    return gk


@njit(cache=True)
def conv_bwd_kernels_gen(xp, go, gk, stride):
    """Kernel gradient for any stride; vector row accumulator, sequential sum."""
    B, Cin, Hp, Wp = xp.shape
    _, Cout, Ho, Wo = go.shape
    _, _, kH, kW = gk.shape
    acc = np.zeros(Wo, dtype=np.float32)
    for o in range(Cout):
        for c in range(Cin):
            for i in range(kH):
                for j in range(kW):
                    for x in range(Wo):
                        acc[x] = 0.0
                    for n in range(B):
                        for y in range(Ho):
                            grow = go[n, o, y]
                            xrow = xp[n, c, y * stride + i]
                            for x in range(Wo):
                                acc[x] = acc[x] + grow[x] * xrow[x * stride + j]
                    s = np.float32(0.0)
                    for x in range(Wo):
                        s += acc[x]
                    gk[o, c, i, j] = s
    return gk


@njit(cache=True)
def maxpool2x2(x, out, idx):
    """2x2/stride-2 max with argmax in row-major window order; first max wins."""
    B, C, H, W = x.shape
    for n in range(B):
        for c in range(C):
            for y in range(H // 2):
                r0 = x[n, c, 2 * y]
                r1 = x[n, c, 2 * y + 1]
                for xo in range(W // 2):
                    v0 = r0[2 * xo]
                    v1 = r0[2 * xo + 1]
                    v2 = r1[2 * xo]
                    v3 = r1[2 * xo + 1]
                    best = v0
                    k = np.uint8(0)
                    if v1 > best:
                        best = v1
                        k = np.uint8(1)
                    if v2 > best:
                        best = v2
                        k = np.uint8(2)
                    if v3 > best:
                        best = v3
                        k = np.uint8(3)
                    out[n, c, y, xo] = best
                    idx[n, c, y, xo] = k


@njit(cache=True)
def maxpool2x2_backward(go, idx, gi):
    """Scatter each gradient element to its cached argmax position."""
    B, C, Ho, Wo = go.shape
    for n in range(B):
        for c in range(C):
            for y in range(Ho):
                for xo in range(Wo):
                    k = idx[n, c, y, xo]
                    gi[n, c, 2 * y + (k >> 1), 2 * xo + (k & 1)] = go[n, c, y, xo]


@njit(cache=True)
def upsample2_backward(go, gi):
    """Sum the gradient over each 2x2 replicated block."""
    B, C, Ho, Wo = gi.shape
    for n in range(B):
        for c in range(C):
            for y in range(Ho):
                r0 = go[n, c, 2 * y]
                r1 = go[n, c, 2 * y + 1]
                orow = gi[n, c, y]
                for xo in range(Wo):
                    orow[xo] = (r0[2 * xo] + r0[2 * xo + 1]) + (r1[2 * xo] + r1[2 * xo + 1])


def warmup():
    """Force compilation of every kernel on tiny inputs."""
    xp = np.zeros((1, 1, 4, 4), dtype=np.float32)
    k = np.zeros((1, 1, 3, 3), dtype=np.float32)
    b = np.zeros(1, dtype=np.float32)
    out = np.zeros((1, 1, 2, 2), dtype=np.float32)
    gk = np.zeros((1, 1, 3, 3), dtype=np.float32)
    conv_fwd_s1(xp, k, b, out)
    conv_fwd_gen(xp, k, b, out, 1)
    conv_bwd_input_s1(xp, k, np.zeros((1, 1, 2, 2), dtype=np.float32), 0)
    conv_bwd_kernels_s1(xp, out, gk, b.copy())
    conv_bwd_kernels_gen(xp, out, gk, 1)
    pool_out = np.zeros((1, 1, 2, 2), dtype=np.float32)
    pool_idx = np.zeros((1, 1, 2, 2), dtype=np.uint8)
    maxpool2x2(xp, pool_out, pool_idx)
    maxpool2x2_backward(pool_out, pool_idx, np.zeros((1, 1, 4, 4), dtype=np.float32))
    upsample2_backward(xp, np.zeros((1, 1, 2, 2), dtype=np.float32))
