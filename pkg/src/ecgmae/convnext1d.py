"""ConvNeXtV2 encoder adapted to single-lead 1D beat windows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn_core as nn
from .errors import InvalidConfig, ShapeMismatch
from .rng import stream

KERNEL_SIZE = 7
STEM_STRIDE = 4
DOWNSAMPLE_STRIDE = 2
TOTAL_STRIDE = STEM_STRIDE * DOWNSAMPLE_STRIDE ** 3


@dataclass(frozen=True)
class ModelConfig:
    base_channels: int
    blocks_per_stage: tuple[int, int, int, int]
    name: str = "custom"

    def __post_init__(self):
        if self.base_channels < 1:
            raise InvalidConfig("base_channels must be positive")
        if len(self.blocks_per_stage) != 4 or any(b < 0 for b in self.blocks_per_stage):
            raise InvalidConfig("blocks_per_stage needs four non-negative counts")

    @property
    def stage_dims(self) -> tuple[int, int, int, int]:
        c = self.base_channels
        return (c, 2 * c, 4 * c, 8 * c)

    @property
    def feature_dim(self) -> int:
        return 8 * self.base_channels

    def to_dict(self) -> dict:
        return {"name": self.name, "base_channels": self.base_channels,
                "blocks_per_stage": list(self.blocks_per_stage)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(int(d["base_channels"]), tuple(int(b) for b in d["blocks_per_stage"]),
                   d.get("name", "custom"))


PRESETS = {
    "atto": ModelConfig(40, (2, 2, 6, 2), "atto"),
    "tiny": ModelConfig(96, (3, 3, 9, 3), "tiny"),
    "base": ModelConfig(192, (3, 3, 27, 3), "base"),
}


def get_preset(name: str) -> ModelConfig:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise InvalidConfig(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


class Block(nn.Module):
    """dwconv7 -> LN -> 4x expand -> GELU -> GRN -> project, plus residual."""

    def __init__(self, dim: int, rng: np.random.Generator):
        self.dim = dim
        self.dwconv = nn.Conv1d(dim, dim, KERNEL_SIZE, padding=KERNEL_SIZE // 2, groups=dim, rng=rng)
        self.norm = nn.LayerNorm(dim)
        self.pwconv1 = nn.Linear(dim, 4 * dim, rng=rng)
        self.grn = nn.GRN(4 * dim)
        self.pwconv2 = nn.Linear(4 * dim, dim, rng=rng)

    def forward(self, x):
        if x.ndim != 3 or x.shape[1] != self.dim:
            raise ShapeMismatch(f"block of dim {self.dim} got input {x.shape}")
        y = self.dwconv(x).transpose(0, 2, 1)  # (B, L, D)
        y = self.norm(y)
        y = nn.gelu(self.pwconv1(y))
        y = self.grn(y)
        y = self.pwconv2(y).transpose(0, 2, 1)
        return x + y


class Downsample(nn.Module):
    def __init__(self, cin: int, cout: int, rng: np.random.Generator):
        self.norm = nn.LayerNorm(cin, channels_first=True)
        self.conv = nn.Conv1d(cin, cout, DOWNSAMPLE_STRIDE, stride=DOWNSAMPLE_STRIDE, rng=rng)

    def forward(self, x):
        return self.conv(self.norm(x))


class Stem(nn.Module):
    def __init__(self, cout: int, rng: np.random.Generator):
        self.conv = nn.Conv1d(1, cout, STEM_STRIDE, stride=STEM_STRIDE, rng=rng)
        self.norm = nn.LayerNorm(cout, channels_first=True)

    def forward(self, x):
        return self.norm(self.conv(x))


class Stage(nn.Module):
    def __init__(self, dim: int, depth: int, rng: np.random.Generator):
        self.blocks = [Block(dim, rng) for _ in range(depth)]

    def forward(self, x):
        for blk in self.blocks:
            x = blk(x)
        return x


class Encoder(nn.Module):
    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        dims = config.stage_dims
        self.stem = Stem(dims[0], rng)
        self.downsample = [Downsample(dims[i - 1], dims[i], rng) for i in range(1, 4)]
        self.stages = [Stage(dims[i], config.blocks_per_stage[i], rng) for i in range(4)]
        self.norm = nn.LayerNorm(dims[3], channels_first=True)

    def check_input(self, x):
        if x.ndim != 3 or x.shape[1] != 1:
            raise ShapeMismatch(f"encoder expects (B, 1, L), got {x.shape}")
        if x.shape[2] % TOTAL_STRIDE or x.shape[2] == 0:
            raise ShapeMismatch(f"input length {x.shape[2]} is not a multiple of {TOTAL_STRIDE}")

    def forward(self, x):
        return forward_features(self, x)


def build_encoder(config: ModelConfig, seed: int = 0) -> Encoder:
    """Deterministically initialized encoder for ``config``."""
    if not isinstance(config, ModelConfig):
        raise InvalidConfig(f"expected ModelConfig, got {type(config).__name__}")
    return Encoder(config, stream(seed, "init.encoder"))


def forward_features(model: Encoder, x) -> nn.Tensor:
    """(B, 1, L) -> (B, 8C, L/32) feature map (final channel norm applied)."""
    x = nn.as_tensor(x)
    model.check_input(x)
    x = model.stem(x)
    for i, stage in enumerate(model.stages):
        if i > 0:
            x = model.downsample[i - 1](x)
        x = stage(x)
    return model.norm(x)


def count_parameters(config: ModelConfig) -> int:
    """Closed-form parameter count of :func:`build_encoder`'s model."""
    d = config.stage_dims
    total = (STEM_STRIDE * d[0] + d[0]) + 2 * d[0]
    for i in range(1, 4):
        total += 2 * d[i - 1] + DOWNSAMPLE_STRIDE * d[i - 1] * d[i] + d[i]
    for dim, depth in zip(d, config.blocks_per_stage):
        per_block = (KERNEL_SIZE * dim + dim) + 2 * dim + (4 * dim * dim + 4 * dim) \
            + 2 * 4 * dim + (4 * dim * dim + dim)
        total += depth * per_block
    return total + 2 * d[3]


class ClassifierHead(nn.Module):
    """Pool -> LN -> Linear(hidden) -> GELU -> Linear(n_classes)."""

    def __init__(self, in_dim: int, hidden: int = 128, n_classes: int = 5, seed: int = 0):
        rng = stream(seed, "init.head")
        self.in_dim, self.hidden, self.n_classes = in_dim, hidden, n_classes
        self.norm = nn.LayerNorm(in_dim)
        self.fc1 = nn.Linear(in_dim, hidden, rng=rng)
        self.fc2 = nn.Linear(hidden, n_classes, rng=rng)

    def forward(self, features):
        h = self.norm(nn.global_avg_pool(features))
        return self.fc2(nn.gelu(self.fc1(h)))

    def to_dict(self) -> dict:
        return {"in_dim": self.in_dim, "hidden": self.hidden, "n_classes": self.n_classes}
