"""Convolution-transformer EEG encoder and upsampling position-map decoder."""

from __future__ import annotations

import numpy as np

from ..autodiff import functional as F
from ..autodiff.nn import (
    BatchNorm2d,
    Conv2d,
    ConvTranspose2d,
    Dense,
    LayerNorm,
    Module,
    MultiheadSelfAttention,
)
from ..autodiff.tensor import Tensor
from ..errors import DimensionError
from .config import DecoderConfig, EncoderConfig


class EncoderLayer(Module):
    """Pre-norm transformer block: attention and a feed-forward net, each residual."""

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        e = cfg.embed_dim
        self.norm1 = LayerNorm(e)
        self.attn = MultiheadSelfAttention(e, cfg.heads, rng)
        self.norm2 = LayerNorm(e)
        self.ff1 = Dense(e, e * cfg.ff_multiplier, rng)
        self.ff2 = Dense(e * cfg.ff_multiplier, e, rng)
        self.p = cfg.dropout
        self.act = cfg.activation

    def forward(self, x, rng=None):
        h = F.dropout(self.attn(self.norm1(x)), self.p, self.training, rng)
        x = x + h
        h = F.activation(self.ff1(self.norm2(x)), self.act)
        h = F.dropout(h, self.p, self.training, rng)
        h = F.dropout(self.ff2(h), self.p, self.training, rng)
        return x + h


class Encoder(Module):
    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.temporal = Conv2d(1, cfg.stem_channels, (1, cfg.temporal_kernel), rng)
        self.spatial = Conv2d(cfg.stem_channels, cfg.stem_channels, (cfg.spatial_kernel, 1), rng)
        self.bn = BatchNorm2d(cfg.stem_channels)
        self.project = Conv2d(cfg.stem_channels, cfg.embed_dim, (1, 1), rng)
        if cfg.positional == "learned":
            self.position = Tensor(np.zeros((cfg.tokens, cfg.embed_dim), np.float32), requires_grad=True)
        self.layers = [EncoderLayer(cfg, rng) for _ in range(cfg.layers)]

    def forward(self, x, rng=None):
        cfg = self.cfg
        expect = (1, cfg.channels, cfg.window)
        if x.ndim != 4 or tuple(x.shape[1:]) != expect:
            raise DimensionError(f"encoder input: expected (B, {', '.join(map(str, expect))}), got {x.shape}")
        h = self.spatial(self.temporal(x))                       # (B, S, 1, W - k + 1)
        h = F.elu(self.bn(h))
        h = F.avg_pool2d(h, (1, cfg.pool_kernel), (1, cfg.pool_stride))
        h = self.project(h)                                      # (B, E, 1, N)
        b, e, _, n = h.shape
        tokens = F.transpose(F.reshape(h, (b, e, n)), (0, 2, 1))  # (B, N, E)
        if cfg.positional == "learned":
            tokens = tokens + self.position
        for layer in self.layers:
            tokens = layer(tokens, rng)
        return tokens


class Decoder(Module):
    def __init__(self, cfg: DecoderConfig, rng: np.random.Generator):
        self.cfg = cfg
        widths = (cfg.input_width,) + tuple(cfg.projection_widths)
        self.dense = [Dense(a, b, rng) for a, b in zip(widths[:-1], widths[1:])]
        chans = [cfg.latent_channels] + list(cfg.upsampler_channels[:cfg.upsampler_stages - 1]) + [cfg.coarse_channels]
        self.up = [Conv2d(a, b, 3, rng) for a, b in zip(chans[:-1], chans[1:])]
        tchans = [cfg.coarse_channels] + [cfg.transposed_hidden] * (cfg.transposed_stages - 1) + [cfg.output_channels]
        self.transposed = [ConvTranspose2d(a, b, 2, rng, stride=2) for a, b in zip(tchans[:-1], tchans[1:])]
        self.transposed[-1].weight.data *= cfg.output_gain

    def forward(self, tokens):
        cfg = self.cfg
        if tokens.ndim != 3 or tokens.shape[1:] != (cfg.tokens, cfg.embed_dim):
            raise DimensionError(f"decoder input: expected (B, {cfg.tokens}, {cfg.embed_dim}), got {tokens.shape}")
        b = tokens.shape[0]
        h = F.reshape(tokens, (b, cfg.input_width))
        for layer in self.dense:
            h = F.gelu(layer(h))
        h = F.reshape(h, (b, cfg.latent_channels, cfg.latent_size, cfg.latent_size))
        for i, conv in enumerate(self.up):
            h = conv(F.pad2d(F.upsample_nearest2d(h, 2), 1))
            if i < len(self.up) - 1:
                h = F.gelu(h)
        for i, tconv in enumerate(self.transposed):
            h = tconv(h)
            if i < len(self.transposed) - 1:
                h = F.gelu(h)
        return h


class PositionMapNet(Module):
    """EEG window batch ``(B, 1, C, W)`` to position maps ``(B, 3, S, S)``."""

    def __init__(self, encoder: EncoderConfig | None = None, decoder: DecoderConfig | None = None,
                 seed: int = 0):
        encoder = encoder or EncoderConfig()
        decoder = decoder or DecoderConfig(tokens=encoder.tokens, embed_dim=encoder.embed_dim)
        if (decoder.tokens, decoder.embed_dim) != (encoder.tokens, encoder.embed_dim):
            raise DimensionError(f"decoder expects {decoder.tokens}x{decoder.embed_dim} tokens, "
                                 f"encoder yields {encoder.tokens}x{encoder.embed_dim}")
        rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
        self.encoder = Encoder(encoder, rng)
        self.decoder = Decoder(decoder, rng)
        self._dropout_rng = np.random.default_rng(np.random.SeedSequence([seed, 8]))

    def forward(self, x, rng=None):
        x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))
        return self.decoder(self.encoder(x, rng if rng is not None else self._dropout_rng))

    def predict(self, x: np.ndarray, batch: int = 16) -> np.ndarray:
        """Eval-mode inference without recording, in chunks."""
        was = self.training
        self.eval()
        try:
            outs = [self.forward(Tensor(np.asarray(x[i:i + batch], dtype=np.float32))).data
                    for i in range(0, len(x), batch)]
        finally:
            self.train(was)
        return np.concatenate(outs) if outs else np.zeros((0,))
