"""Finite-difference gradient checks over every layer and a shrunk end-to-end network.

Each check builds float64 leaves from a seed, projects the output onto a
fixed random probe and compares tape gradients with central differences.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Tensor, grad_check
from ..autodiff import functional as F
from .config import DecoderConfig, EncoderConfig
from .loss import position_map_loss
from .network import PositionMapNet

TOL = 1e-4

SHRUNK_ENCODER = EncoderConfig(channels=4, window=40, temporal_kernel=5, stem_channels=4, spatial_kernel=4,
                               pool_kernel=6, pool_stride=6, embed_dim=4, layers=1, heads=2, dropout=0.0)
SHRUNK_DECODER = DecoderConfig(tokens=SHRUNK_ENCODER.tokens, embed_dim=4, projection_widths=(12, 8),
                               latent_channels=2, latent_size=2, upsampler_stages=1, transposed_stages=2,
                               transposed_hidden=3)

_ATTN = ["wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo"]


def _leaf(rng, shape, scale=1.0):
    return Tensor(rng.normal(scale=scale, size=shape), requires_grad=True)


def _conv(rng, seed):
    x, w, b = _leaf(rng, (2, 2, 5, 6)), _leaf(rng, (3, 2, 2, 3)), _leaf(rng, (3,))
    stride = [(1, 1), (2, 1), (1, 2)][seed % 3]
    return lambda: F.conv2d(x, w, b, stride), {"x": x, "w": w, "b": b}


def _conv_t(rng, seed):
    x, w, b = _leaf(rng, (2, 3, 3, 4)), _leaf(rng, (3, 2, 2, 3)), _leaf(rng, (2,))
    stride = [(1, 1), (2, 2), (2, 1)][seed % 3]
    return lambda: F.conv_transpose2d(x, w, b, stride), {"x": x, "w": w, "b": b}


def _batchnorm(training):
    def make(rng, seed):
        x, g, b = _leaf(rng, (3, 2, 2, 3)), _leaf(rng, (2,)), _leaf(rng, (2,))
        rm, rv = rng.normal(size=2), rng.uniform(0.5, 2.0, size=2)
        # copies keep the running statistics identical across repeated calls
        return lambda: F.batch_norm2d(x, g, b, rm.copy(), rv.copy(), training), {"x": x, "gamma": g, "beta": b}
    return make


def _pool(rng, seed):
    x = _leaf(rng, (2, 2, 3, 11))
    return lambda: F.avg_pool2d(x, (1, 4), (1, 3)), {"x": x}


def _dense(rng, seed):
    x, w, b = _leaf(rng, (4, 5)), _leaf(rng, (5, 3)), _leaf(rng, (3,))
    return lambda: F.dense(x, w, b), {"x": x, "w": w, "b": b}


def _layer_norm(rng, seed):
    x, g, b = _leaf(rng, (2, 3, 6)), _leaf(rng, (6,)), _leaf(rng, (6,))
    return lambda: F.layer_norm(x, g, b), {"x": x, "gamma": g, "beta": b}


def _attention(rng, seed):
    x = _leaf(rng, (2, 4, 8))
    p = {n: _leaf(rng, (8, 8) if n[0] == "w" else (8,), 0.5) for n in _ATTN}
    return lambda: F.multihead_self_attention(x, 2, *p.values()), {"x": x, **p}


def _activation(kind):
    def make(rng, seed):
        x = _leaf(rng, (3, 7))
        return lambda: F.activation(x, kind), {"x": x}
    return make


def _dropout(rng, seed):
    x = _leaf(rng, (4, 5))
    return lambda: F.dropout(x, 0.5, True, np.random.default_rng(seed)), {"x": x}


def _upsample(rng, seed):
    x = _leaf(rng, (1, 2, 3, 4))
    return lambda: F.upsample_nearest2d(F.pad2d(x, 1), 2), {"x": x}


LAYER_CHECKS: dict[str, Callable] = {
    "conv2d": _conv,
    "conv_transpose2d": _conv_t,
    "batchnorm2d_train": _batchnorm(True),
    "batchnorm2d_eval": _batchnorm(False),
    "avgpool2d": _pool,
    "dense": _dense,
    "layer_norm": _layer_norm,
    "attention": _attention,
    "elu": _activation("elu"),
    "gelu": _activation("gelu"),
    "dropout": _dropout,
    "upsample_pad": _upsample,
}


def _disc(n: int) -> np.ndarray:
    i, j = np.mgrid[0:n, 0:n]
    return ((i - n / 2 + 0.5) ** 2 + (j - n / 2 + 0.5) ** 2 <= (0.4 * n) ** 2).astype(np.uint8)


def model_check(seed: int, encoder: EncoderConfig = SHRUNK_ENCODER, decoder: DecoderConfig = SHRUNK_DECODER,
                batch: int = 2, entries: int = 6, tol: float = TOL):
    """Position-map loss through the whole network, a random subset of entries per parameter."""
    net = PositionMapNet(encoder, decoder, seed=seed).astype(np.float64)
    rng = np.random.default_rng(100 + seed)
    x = Tensor(rng.normal(size=(batch, 1, encoder.channels, encoder.window)), requires_grad=True)
    size = decoder.output_size
    target = rng.normal(size=(batch, 3, size, size))
    mask = _disc(size)
    return grad_check(lambda: position_map_loss(net(x), target, mask).total, {"input": x, **net.parameters()},
                      tol=tol, max_entries=entries, rng=rng)


def layer_check(name: str, seed: int, tol: float = TOL):
    rng = np.random.default_rng(seed)
    build, params = LAYER_CHECKS[name](rng, seed)
    probe_rng = np.random.default_rng(10_000 + seed)
    probe = {}

    def f():
        out = build()
        if "c" not in probe:
            probe["c"] = probe_rng.normal(size=out.shape)
        return (out * probe["c"]).sum()

    return grad_check(f, params, tol=tol)


@dataclass
class SuiteReport:
    tol: float
    seeds: int
    errors: dict[str, float] = field(default_factory=dict)   # worst relative error per check

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tol

    def render(self) -> str:
        width = max(map(len, self.errors), default=4)
        lines = [f"{name:<{width}}  {err:.3e}  {'ok' if err <= self.tol else 'FAIL'}"
                 for name, err in self.errors.items()]
        lines.append(f"max rel err {self.max_error:.3e} over {self.seeds} seeds (tol {self.tol:g})")
        return "\n".join(lines)


def run_suite(seeds: Iterable[int] = range(20), include_model: bool = True, tol: float = TOL) -> SuiteReport:
    seeds = list(seeds)
    report = SuiteReport(tol, len(seeds))
    for name in LAYER_CHECKS:
        report.errors[name] = max(layer_check(name, s, tol).max_error for s in seeds)
    if include_model:
        report.errors["end_to_end_shrunk"] = max(model_check(s, tol=tol).max_error for s in seeds)
    return report
