"""One JSON document describing a whole pipeline run, with every default spelled out."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .model.config import DecoderConfig, EncoderConfig, LossWeights, TrainConfig
from .signal.preprocess import WINDOW
from .splat.loss import SplatLossWeights
from .synth.config import SynthConfig

CONFIG_NAME = "run_config.json"


@dataclass(frozen=True)
class FilterSettings:
    low_hz: float = 4.0
    high_hz: float = 40.0
    order: int = 6
    zero_phase: bool = True

    def __post_init__(self):
        if not 0 < self.low_hz < self.high_hz:
            raise ConfigError("filter band needs 0 < low_hz < high_hz")
        if self.order < 2 or self.order % 2:
            raise ConfigError("band-pass order must be even and at least 2")


@dataclass(frozen=True)
class RenderSettings:
    eye: tuple[float, float, float] = (0.0, 0.0, 0.45)
    target: tuple[float, float, float] = (0.0, 0.0, 0.04)
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)
    fov_deg: float = 40.0
    size: tuple[int, int] = (128, 128)
    color: tuple[float, float, float] = (0.85, 0.66, 0.56)
    splat_scale: float = 0.5
    splat_opacity: float = 0.9

    def __post_init__(self):
        if not 0 < self.fov_deg < 180:
            raise ConfigError("fov_deg must lie in (0, 180)")
        if min(self.size) < 1:
            raise ConfigError("render size must be positive")


@dataclass(frozen=True)
class Paths:
    data: str = "data"
    out: str = "runs"


_SECTIONS = {
    "synth": SynthConfig, "filter": FilterSettings, "encoder": EncoderConfig, "decoder": DecoderConfig,
    "train": TrainConfig, "loss": LossWeights, "splat_loss": SplatLossWeights, "render": RenderSettings,
    "paths": Paths,
}


@dataclass(frozen=True)
class RunConfig:
    """``seed`` is the master seed: it overrides the synth and train seeds and initialises the network."""

    seed: int = 0
    window: int = WINDOW
    synth: SynthConfig = field(default_factory=SynthConfig)
    filter: FilterSettings = field(default_factory=FilterSettings)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    splat_loss: SplatLossWeights = field(default_factory=SplatLossWeights)
    render: RenderSettings = field(default_factory=RenderSettings)
    paths: Paths = field(default_factory=Paths)

    def __post_init__(self):
        if self.window != self.encoder.window:
            raise ConfigError(f"window {self.window} differs from encoder.window {self.encoder.window}")
        if self.encoder.channels != self.synth.channels:
            raise ConfigError(f"encoder.channels {self.encoder.channels} differs from synth.channels "
                              f"{self.synth.channels}")
        if (self.decoder.tokens, self.decoder.embed_dim) != (self.encoder.tokens, self.encoder.embed_dim):
            raise ConfigError(f"decoder expects {self.decoder.tokens}x{self.decoder.embed_dim} tokens, encoder "
                              f"gives {self.encoder.tokens}x{self.encoder.embed_dim}")
        if self.decoder.output_size != self.synth.resolution:
            raise ConfigError(f"decoder output {self.decoder.output_size} differs from synth.resolution "
                              f"{self.synth.resolution}")
        object.__setattr__(self, "synth", dataclasses.replace(self.synth, seed=self.seed))
        object.__setattr__(self, "train", dataclasses.replace(self.train, seed=self.seed))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict | None) -> RunConfig:
        d = dict(d or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown run settings: {sorted(unknown)}")
        kwargs = {}
        for name, value in d.items():
            if name in _SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigError(f"section {name!r} must be a JSON object")
                kwargs[name] = _section(_SECTIONS[name], value)
            else:
                kwargs[name] = value
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(raw)

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / CONFIG_NAME
        path.write_text(self.to_json())
        return path


def _section(kind, value: dict):
    if hasattr(kind, "from_dict"):
        return kind.from_dict(value)
    known = {f.name for f in dataclasses.fields(kind)}
    unknown = set(value) - known
    if unknown:
        raise ConfigError(f"unknown {kind.__name__} settings: {sorted(unknown)}")
    value = {k: tuple(v) if isinstance(v, list) else v for k, v in value.items()}
    try:
        return kind(**value)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
