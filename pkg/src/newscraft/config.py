"""Model and training configuration."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError
from .fusion import FusionStrategy

COMPONENTS = ("SEN", "SEM", "SPA", "TEM")


@dataclass
class ModelConfig:
    """All architecture and optimization hyperparameters.

    ``components`` toggles the four aspects (sentiment, semantic, spatial,
    temporal); a branch exists iff one of its aspects is enabled.
    """

    dim: int = 128
    heads: int = 8
    co_heads: int = 4
    ff_mult: int = 4
    head_depth: int = 3
    dropout: float = 0.1
    twoway_dim: int = 256
    twoway_heads: int = 8
    twoway_blocks: int = 2
    conv_channels: tuple[int, int] = (64, 32)
    conv_kernel: int = 3
    conv_stride: int = 2
    conv_padding: int = 1
    n_duration_bins: int = 10
    alpha: float = 0.1
    beta: float = 2.0
    fusion: str = "MUL_TANH"
    lr: float = 1e-3
    batch_size: int = 128
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0
    components: tuple[str, ...] = field(default_factory=lambda: COMPONENTS)

    def validate(self) -> "ModelConfig":
        self.components = tuple(self.components)
        unknown = [c for c in self.components if c not in COMPONENTS]
        if unknown:
            raise ConfigError(f"unknown component(s) {unknown}; valid: {COMPONENTS}")
        if not self.components:
            raise ConfigError("at least one component must be enabled")
        if len(set(self.components)) != len(self.components):
            raise ConfigError(f"duplicate components in {self.components}")
        try:
            FusionStrategy(self.fusion)
        except ValueError:
            raise ConfigError(
                f"unknown fusion strategy {self.fusion!r}; "
                f"valid: {[s.value for s in FusionStrategy]}") from None
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError(f"alpha/beta must be >= 0, got {self.alpha}, {self.beta}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 0:
            raise ConfigError(f"patience must be >= 0, got {self.patience}")
        if self.dim % 2 != 0:
            raise ConfigError(f"dim must be even for position/duration encodings, got {self.dim}")
        if self.dim % self.heads != 0:
            raise ConfigError(f"dim {self.dim} not divisible by heads {self.heads}")
        if self.dim % self.co_heads != 0:
            raise ConfigError(f"dim {self.dim} not divisible by co_heads {self.co_heads}")
        if self.twoway_dim % self.twoway_heads != 0:
            raise ConfigError(
                f"twoway_dim {self.twoway_dim} not divisible by heads {self.twoway_heads}")
        if self.twoway_dim % 2 != 0:
            raise ConfigError(f"twoway_dim must be even, got {self.twoway_dim}")
        if self.n_duration_bins < 2:
            raise ConfigError(f"n_duration_bins must be >= 2, got {self.n_duration_bins}")
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if self.head_depth < 1:
            raise ConfigError(f"head_depth must be >= 1, got {self.head_depth}")
        if self.conv_kernel < 1 or self.conv_stride < 1 or self.conv_padding < 0:
            raise ConfigError(
                f"bad conv geometry: kernel={self.conv_kernel}, "
                f"stride={self.conv_stride}, padding={self.conv_padding}")
        self.conv_channels = tuple(self.conv_channels)
        if len(self.conv_channels) != 2 or any(c < 1 for c in self.conv_channels):
            raise ConfigError(f"conv_channels must be two positive ints, "
                              f"got {self.conv_channels}")
        return self

    # component helpers
    def with_sentiment(self) -> bool:
        return "SEN" in self.components

    def with_semantic(self) -> bool:
        return "SEM" in self.components

    def with_spatial(self) -> bool:
        return "SPA" in self.components

    def with_temporal(self) -> bool:
        return "TEM" in self.components

    def has_selection(self) -> bool:
        return self.with_sentiment() or self.with_semantic()

    def has_editing(self) -> bool:
        return self.with_spatial() or self.with_temporal()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["components"] = list(self.components)
        d["conv_channels"] = list(self.conv_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        cfg = cls()
        for key, value in d.items():
            if not hasattr(cfg, key):
                raise ConfigError(f"unknown config field {key!r}")
            if key in ("components", "conv_channels"):
                value = tuple(value)
            setattr(cfg, key, value)
        return cfg.validate()

    @classmethod
    def from_json(cls, path: str | Path) -> "ModelConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))
