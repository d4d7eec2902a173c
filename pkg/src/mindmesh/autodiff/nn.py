"""Parameter containers built on the functional ops."""

from __future__ import annotations

import math

import numpy as np

from . import functional as F
from .tensor import DEFAULT_DTYPE, Tensor


def kaiming_uniform(rng: np.random.Generator, shape, fan_in: int, dtype=DEFAULT_DTYPE) -> Tensor:
    bound = math.sqrt(6.0 / max(fan_in, 1))
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)


def zeros(shape, dtype=DEFAULT_DTYPE, requires_grad=True) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def ones(shape, dtype=DEFAULT_DTYPE, requires_grad=True) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=requires_grad)


class Module:
    """Minimal module: attribute-ordered tensor discovery, train/eval flag.

    Tensor attributes with ``requires_grad`` are parameters; other tensor
    attributes (e.g. batch-norm running statistics) are buffers.  Both are
    part of :meth:`state_dict`.
    """

    training = True

    def named_tensors(self, prefix: str = ""):
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            full = f"{prefix}{name}"
            if isinstance(value, Tensor):
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_tensors(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_tensors(f"{full}.{i}.")

    def modules(self):
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def parameters(self) -> dict[str, Tensor]:
        return {n: t for n, t in self.named_tensors() if t.requires_grad}

    def state_dict(self) -> dict[str, np.ndarray]:
        return {n: t.data for n, t in self.named_tensors()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        own = dict(self.named_tensors())
        missing = set(own) - set(state)
        if missing:
            names = sorted(missing)
            more = f" and {len(names) - 3} more" if len(names) > 3 else ""
            raise KeyError(f"state is missing {len(names)} entries: {', '.join(names[:3])}{more}")
        for name, tensor in own.items():
            src = np.asarray(state[name])
            if src.shape != tensor.shape:
                raise ValueError(f"{name}: shape {src.shape} != {tensor.shape}")
            tensor.data[...] = src

    def zero_grad(self):
        for p in self.parameters().values():
            p.zero_grad()

    def train(self, mode: bool = True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def astype(self, dtype):
        """Convert every tensor in place (e.g. ``np.float64`` for gradient checks)."""
        for _, t in self.named_tensors():
            t.data = t.data.astype(dtype)
            if t.grad is not None:
                t.grad = np.zeros_like(t.data)
        return self

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Dense(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        self.weight = kaiming_uniform(rng, (n_in, n_out), n_in)
        self.bias = zeros((n_out,))

    def forward(self, x):
        return F.dense(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, kernel, rng: np.random.Generator, stride=(1, 1)):
        kh, kw = F._pair(kernel)
        self.stride = F._pair(stride)
        self.weight = kaiming_uniform(rng, (c_out, c_in, kh, kw), c_in * kh * kw)
        self.bias = zeros((c_out,))

    def forward(self, x):
        return F.conv2d(x, self.weight, self.bias, self.stride)


class ConvTranspose2d(Module):
    def __init__(self, c_in: int, c_out: int, kernel, rng: np.random.Generator, stride=(1, 1)):
        kh, kw = F._pair(kernel)
        self.stride = F._pair(stride)
        # each output pixel of a (k, s) transposed conv sees ~ c_in * k*k/(s*s) taps
        fan_in = max(1, c_in * kh * kw // (self.stride[0] * self.stride[1]))
        self.weight = kaiming_uniform(rng, (c_in, c_out, kh, kw), fan_in)
        self.bias = zeros((c_out,))

    def forward(self, x):
        return F.conv_transpose2d(x, self.weight, self.bias, self.stride)


class BatchNorm2d(Module):
    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.gamma = ones((channels,))
        self.beta = zeros((channels,))
        self.running_mean = zeros((channels,), requires_grad=False)
        self.running_var = ones((channels,), requires_grad=False)
        self.momentum = momentum
        self.eps = eps

    def forward(self, x):
        return F.batch_norm2d(x, self.gamma, self.beta, self.running_mean.data,
                              self.running_var.data, self.training, self.momentum, self.eps)


class LayerNorm(Module):
    def __init__(self, width: int, eps: float = 1e-5):
        self.gamma = ones((width,))
        self.beta = zeros((width,))
        self.eps = eps

    def forward(self, x):
        return F.layer_norm(x, self.gamma, self.beta, self.eps)


class MultiheadSelfAttention(Module):
    def __init__(self, width: int, heads: int, rng: np.random.Generator):
        if width % heads:
            from ..errors import ConfigError
            raise ConfigError(f"embedding width {width} is not divisible by {heads} heads")
        self.heads = heads
        self.q = Dense(width, width, rng)
        self.k = Dense(width, width, rng)
        self.v = Dense(width, width, rng)
        self.out = Dense(width, width, rng)

    def forward(self, x, return_weights=False):
        return F.multihead_self_attention(
            x, self.heads, self.q.weight, self.q.bias, self.k.weight, self.k.bias,
            self.v.weight, self.v.bias, self.out.weight, self.out.bias,
            return_weights=return_weights)
