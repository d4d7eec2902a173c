"""Differentiable operations on :class:`~mindmesh.autodiff.tensor.Tensor`.

Every op computes its forward value with numpy and, when recorded, a
closure mapping the output gradient to one gradient per input (``None``
for non-differentiable inputs).  Layouts follow the usual deep-learning
conventions: images are ``(B, C, H, W)`` and convolutions are valid
(unpadded) cross-correlations.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf as _erf

from ..errors import ConfigError, DimensionError
from .tensor import Tensor, make_result


def _wrap(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype) if dtype is not None else x)


def _binary(a, b):
    if isinstance(a, Tensor):
        return a, _wrap(b, a)
    b = _wrap(b)
    return _wrap(a, b), b


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ----------------------------------------------------------------------
# elementwise arithmetic
# ----------------------------------------------------------------------

def cast(x: Tensor, dtype) -> Tensor:
    src = x.dtype
    return make_result(x.data.astype(dtype), (x,), lambda g: (g.astype(src),))


def add(a, b) -> Tensor:
    a, b = _binary(a, b)
    return make_result(a.data + b.data, (a, b),
                       lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _binary(a, b)
    return make_result(a.data - b.data, (a, b),
                       lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _binary(a, b)

    def backward(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return make_result(a.data * b.data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _binary(a, b)

    def backward(g):
        ga = unbroadcast(g / b.data, a.shape)
        gb = unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return make_result(a.data / b.data, (a, b), backward)


def neg(x: Tensor) -> Tensor:
    return make_result(-x.data, (x,), lambda g: (-g,))


def power(x: Tensor, exponent: float) -> Tensor:
    if isinstance(exponent, Tensor):
        raise TypeError("power() supports scalar exponents only")
    p = float(exponent)
    return make_result(x.data ** p, (x,), lambda g: (g * p * x.data ** (p - 1),))


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return make_result(y, (x,), lambda g: (g * y,))


def log(x: Tensor) -> Tensor:
    return make_result(np.log(x.data), (x,), lambda g: (g / x.data,))


def sqrt(x: Tensor) -> Tensor:
    y = np.sqrt(x.data)
    return make_result(y, (x,), lambda g: (g * 0.5 / y,))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return make_result(y, (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid(x: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return make_result(y, (x,), lambda g: (g * y * (1.0 - y),))


def abs(x: Tensor) -> Tensor:
    return make_result(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),))


def maximum(x: Tensor, floor: float) -> Tensor:
    """Component-wise ``max(x, floor)``; zero gradient where the floor wins."""
    keep = x.data > floor
    y = np.where(keep, x.data, np.asarray(floor, dtype=x.dtype))
    return make_result(y, (x,), lambda g: (g * keep,))


def where(cond: np.ndarray, a, b) -> Tensor:
    a, b = _binary(a, b)
    cond = np.asarray(cond, dtype=bool)

    def backward(g):
        return unbroadcast(np.where(cond, g, 0), a.shape), unbroadcast(np.where(cond, 0, g), b.shape)

    return make_result(np.where(cond, a.data, b.data), (a, b), backward)


# ----------------------------------------------------------------------
# activations
# ----------------------------------------------------------------------

def elu(x: Tensor, alpha: float = 1.0) -> Tensor:
    pos = x.data > 0
    e = np.exp(np.minimum(x.data, 0))
    y = np.where(pos, x.data, alpha * (e - 1.0))
    return make_result(y, (x,), lambda g: (g * np.where(pos, 1.0, alpha * e),))


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x: Tensor, approximate: str = "tanh") -> Tensor:
    """GELU; ``approximate="tanh"`` (default) or ``"none"`` for the erf form."""
    v = x.data
    if approximate == "tanh":
        inner = _GELU_C * (v + 0.044715 * v ** 3)
        t = np.tanh(inner)
        y = 0.5 * v * (1.0 + t)

        def backward(g):
            dinner = _GELU_C * (1.0 + 3 * 0.044715 * v * v)
            return (g * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner),)
    elif approximate == "none":
        cdf = 0.5 * (1.0 + _erf(v / math.sqrt(2.0)))
        y = v * cdf

        def backward(g):
            pdf = np.exp(-0.5 * v * v) / math.sqrt(2.0 * math.pi)
            return (g * (cdf + v * pdf),)
    else:
        raise ConfigError(f"unknown GELU approximation {approximate!r}")
    return make_result(y.astype(v.dtype, copy=False), (x,), backward)


def activation(x: Tensor, kind: str) -> Tensor:
    kind = kind.lower()
    if kind == "elu":
        return elu(x)
    if kind == "gelu":
        return gelu(x)
    raise ConfigError(f"unknown activation {kind!r}")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return make_result(y, (x,), backward)


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None) -> Tensor:
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ConfigError("training-mode dropout needs a seeded generator")
    scale = 1.0 / (1.0 - p)
    mask = (rng.random(x.shape) >= p).astype(x.dtype) * x.dtype.type(scale)
    return make_result(x.data * mask, (x,), lambda g: (g * mask,))


# ----------------------------------------------------------------------
# reductions and shape manipulation
# ----------------------------------------------------------------------

def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    shape = x.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return make_result(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), backward)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        n = x.size
    else:
        axes = (axis,) if np.isscalar(axis) else axis
        n = int(np.prod([x.shape[a] for a in axes]))
    return sum(x, axis=axis, keepdims=keepdims) * (1.0 / n)


def reshape(x: Tensor, shape) -> Tensor:
    src = x.shape
    return make_result(x.data.reshape(shape), (x,), lambda g: (g.reshape(src),))


def transpose(x: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inv = tuple(np.argsort(axes))
    return make_result(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inv),))


def getitem(x: Tensor, index) -> Tensor:
    if isinstance(index, Tensor):
        raise TypeError("index with numpy arrays, not tensors")
    shape = x.shape
    parts = index if isinstance(index, tuple) else (index,)
    fancy = any(isinstance(p, (list, np.ndarray)) for p in parts)

    def backward(g):
        out = np.zeros(shape, dtype=g.dtype)
        if fancy:
            np.add.at(out, index, g)
        else:
            out[index] = g
        return (out,)

    return make_result(np.asarray(x.data[index]), (x,), backward)


def concatenate(tensors, axis: int = 0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return make_result(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return make_result(np.stack([t.data for t in tensors], axis=axis), tensors, backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _binary(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs >=2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")

    def backward(g):
        ga = unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        gb = unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return make_result(a.data @ b.data, (a, b), backward)


def l2norm(x: Tensor) -> Tensor:
    """Euclidean norm over all entries; the subgradient at zero is zero."""
    n = np.sqrt(np.sum(x.data * x.data))

    def backward(g):
        if n == 0:
            return (np.zeros_like(x.data),)
        return (g * x.data / n,)

    return make_result(np.asarray(n, dtype=x.dtype), (x,), backward)


# ----------------------------------------------------------------------
# layers
# ----------------------------------------------------------------------

def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map ``x @ weight + bias`` with ``weight`` of shape ``(N, M)``."""
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(f"dense: input width {x.shape[-1]} != weight rows {weight.shape[0]}")
    y = matmul(x, weight)
    return y + bias if bias is not None else y


def _pair(v) -> tuple[int, int]:
    if isinstance(v, int):
        return v, v
    a, b = v
    return int(a), int(b)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride=(1, 1)) -> Tensor:
    """Valid 2-d cross-correlation.  ``weight`` is ``(Cout, Cin, kh, kw)``."""
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(f"conv2d expects 4-d input and weight, got {x.shape}, {weight.shape}")
    B, Cin, H, W = x.shape
    Cout, Cin_w, kh, kw = weight.shape
    sh, sw = _pair(stride)
    if Cin != Cin_w:
        raise DimensionError(f"conv2d channel axis: input has {Cin}, weight expects {Cin_w}")
    if kh > H or kw > W:
        raise DimensionError(f"conv2d kernel {(kh, kw)} exceeds spatial axes {(H, W)}")
    Ho = (H - kh) // sh + 1
    Wo = (W - kw) // sw + 1
    win = sliding_window_view(x.data, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    out = np.tensordot(win, weight.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data.reshape(1, -1, 1, 1)
    out = np.ascontiguousarray(out)

    def backward(g):
        gw = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))
        gx = np.zeros_like(x.data)
        for i in range(kh):
            for j in range(kw):
                contrib = np.tensordot(g, weight.data[:, :, i, j], axes=([1], [0]))
                gx[:, :, i:i + sh * (Ho - 1) + 1:sh, j:j + sw * (Wo - 1) + 1:sw] += contrib.transpose(0, 3, 1, 2)
        gb = g.sum(axis=(0, 2, 3)) if bias is not None else None
        return gx, gw, gb

    inputs = (x, weight, bias) if bias is not None else (x, weight)
    return make_result(out, inputs, backward)


def conv_transpose2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride=(1, 1)) -> Tensor:
    """Transposed convolution (adjoint of :func:`conv2d`), no padding.

    ``weight`` is ``(Cin, Cout, kh, kw)``; output extent is ``(H-1)*s + k``.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(f"conv_transpose2d expects 4-d tensors, got {x.shape}, {weight.shape}")
    B, Cin, H, W = x.shape
    Cin_w, Cout, kh, kw = weight.shape
    sh, sw = _pair(stride)
    if sh < 1 or sw < 1:
        raise ConfigError(f"stride must be >= 1, got {(sh, sw)}")
    if Cin != Cin_w:
        raise DimensionError(f"conv_transpose2d channel axis: input has {Cin}, weight expects {Cin_w}")
    Ho = (H - 1) * sh + kh
    Wo = (W - 1) * sw + kw
    out = np.zeros((B, Cout, Ho, Wo), dtype=np.result_type(x.dtype, weight.dtype))
    for i in range(kh):
        for j in range(kw):
            contrib = np.tensordot(x.data, weight.data[:, :, i, j], axes=([1], [0]))
            out[:, :, i:i + sh * (H - 1) + 1:sh, j:j + sw * (W - 1) + 1:sw] += contrib.transpose(0, 3, 1, 2)
    if bias is not None:
        out += bias.data.reshape(1, -1, 1, 1)

    def backward(g):
        gx = np.zeros_like(x.data)
        gw = np.zeros_like(weight.data)
        for i in range(kh):
            for j in range(kw):
                gs = g[:, :, i:i + sh * (H - 1) + 1:sh, j:j + sw * (W - 1) + 1:sw]
                gx += np.tensordot(gs, weight.data[:, :, i, j], axes=([1], [1])).transpose(0, 3, 1, 2)
                gw[:, :, i, j] = np.tensordot(x.data, gs, axes=([0, 2, 3], [0, 2, 3]))
        gb = g.sum(axis=(0, 2, 3)) if bias is not None else None
        return gx, gw, gb

    inputs = (x, weight, bias) if bias is not None else (x, weight)
    return make_result(out, inputs, backward)


def avg_pool2d(x: Tensor, kernel, stride) -> Tensor:
    """Valid average pooling over the last two axes."""
    B, C, H, W = x.shape
    kh, kw = _pair(kernel)
    sh, sw = _pair(stride)
    if kh > H or kw > W:
        raise DimensionError(f"avg_pool2d kernel {(kh, kw)} larger than input {(H, W)}")
    Ho = (H - kh) // sh + 1
    Wo = (W - kw) // sw + 1
    win = sliding_window_view(x.data, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    out = np.ascontiguousarray(win.mean(axis=(-2, -1)))
    inv = 1.0 / (kh * kw)

    def backward(g):
        gx = np.zeros_like(x.data)
        gs = g * inv
        for i in range(kh):
            for j in range(kw):
                gx[:, :, i:i + sh * (Ho - 1) + 1:sh, j:j + sw * (Wo - 1) + 1:sw] += gs
        return (gx,)

    return make_result(out.astype(x.dtype, copy=False), (x,), backward)


def pad2d(x: Tensor, pad: int) -> Tensor:
    """Zero padding of the last two axes by ``pad`` on every side."""
    if pad == 0:
        return x
    widths = [(0, 0)] * (x.ndim - 2) + [(pad, pad), (pad, pad)]

    def backward(g):
        return (g[..., pad:-pad, pad:-pad],)

    return make_result(np.pad(x.data, widths), (x,), backward)


def upsample_nearest2d(x: Tensor, factor: int = 2) -> Tensor:
    y = x.data.repeat(factor, axis=-2).repeat(factor, axis=-1)
    shape = x.shape

    def backward(g):
        h, w = shape[-2], shape[-1]
        g = g.reshape(*shape[:-2], h, factor, w, factor)
        return (g.sum(axis=(-3, -1)),)

    return make_result(y, (x,), backward)


def batch_norm2d(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
                 running_var: np.ndarray, training: bool, momentum: float = 0.1,
                 eps: float = 1e-5) -> Tensor:
    """Per-channel normalisation over ``(B, H, W)``.

    In training mode ``running_mean``/``running_var`` are updated in place
    (unbiased variance for the running estimate).
    """
    B, C, H, W = x.shape
    n = B * H * W
    shape = (1, C, 1, 1)
    if training:
        if n < 2:
            raise DimensionError(f"batch_norm2d in training needs B*H*W >= 2, got {n}")
        mu = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * n / (n - 1)
    else:
        mu, var = running_mean, running_var
    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = (x.data - mu.reshape(shape).astype(x.dtype)) * inv_std.reshape(shape)
    out = xhat * gamma.data.reshape(shape) + beta.data.reshape(shape)

    def backward(g):
        gbeta = g.sum(axis=(0, 2, 3))
        ggamma = (g * xhat).sum(axis=(0, 2, 3))
        dxhat = g * gamma.data.reshape(shape)
        if training:
            s1 = dxhat.sum(axis=(0, 2, 3), keepdims=True)
            s2 = (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
            gx = inv_std.reshape(shape) / n * (n * dxhat - s1 - xhat * s2)
        else:
            gx = dxhat * inv_std.reshape(shape)
        return gx, ggamma, gbeta

    return make_result(out, (x, gamma, beta), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    E = x.shape[-1]
    if E < 1:
        raise DimensionError("layer_norm needs a non-empty last axis")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    out = xhat * gamma.data + beta.data

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        gbeta = g.sum(axis=lead)
        ggamma = (g * xhat).sum(axis=lead)
        dxhat = g * gamma.data
        gx = inv_std / E * (E * dxhat - dxhat.sum(axis=-1, keepdims=True)
                            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
        return gx, ggamma, gbeta

    return make_result(out.astype(x.dtype, copy=False), (x, gamma, beta), backward)


def multihead_self_attention(x: Tensor, heads: int, wq: Tensor, bq: Tensor, wk: Tensor, bk: Tensor,
                             wv: Tensor, bv: Tensor, wo: Tensor, bo: Tensor,
                             return_weights: bool = False):
    """Full (unmasked) scaled dot-product self-attention over ``(B, N, E)``."""
    B, N, E = x.shape
    if E % heads:
        raise ConfigError(f"embedding width {E} is not divisible by {heads} heads")
    dh = E // heads

    def split(t):
        return transpose(reshape(t, (B, N, heads, dh)), (0, 2, 1, 3))

    q = split(dense(x, wq, bq))
    k = split(dense(x, wk, bk))
    v = split(dense(x, wv, bv))
    scores = matmul(q, transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(dh))
    attn = softmax(scores, axis=-1)
    ctx = reshape(transpose(matmul(attn, v), (0, 2, 1, 3)), (B, N, E))
    out = dense(ctx, wo, bo)
    if return_weights:
        return out, attn
    return out
