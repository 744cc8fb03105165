"""Parameter containers and the handful of layers the models are built from."""

from __future__ import annotations

import hashlib
from typing import Iterator

import numpy as np

from ..errors import ShapeMismatch
from . import functional as F
from .tensor import Tensor


class Parameter(Tensor):
    """A trainable tensor. Freezing drops it from the gradient tape."""

    __slots__ = ("name",)

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name

    @property
    def frozen(self) -> bool:
        return not self.requires_grad

    @frozen.setter
    def frozen(self, value: bool):
        self.requires_grad = not value
        if value:
            self.grad = None


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02, bound: float = 2.0,
                 dtype=np.float32) -> np.ndarray:
    """Normal(0, std) resampled until every draw lies within ``bound`` std."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > bound
    return (out * std).astype(dtype)


class Module:
    """Minimal module tree: parameters and child modules are attributes."""

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def freeze(self):
        for p in self.parameters():
            p.frozen = True
        return self

    def unfreeze(self):
        for p in self.parameters():
            p.frozen = False
        return self

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def astype(self, dtype):
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        if missing or extra:
            raise ShapeMismatch(f"parameter names differ: missing={missing[:3]} unexpected={extra[:3]}")
        for name, p in own.items():
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise ShapeMismatch(f"{name}: checkpoint shape {arr.shape} != model shape {p.shape}")
            p.data = arr.astype(p.dtype, copy=True)

    def checksum(self) -> str:
        """SHA-256 over parameter names and raw bytes."""
        h = hashlib.sha256()
        for name, p in self.named_parameters():
            h.update(name.encode())
            h.update(np.ascontiguousarray(p.data).tobytes())
        return h.hexdigest()


class Conv1d(Module):
    def __init__(self, cin: int, cout: int, kernel_size: int, stride: int = 1, padding: int = 0,
                 groups: int = 1, rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.stride, self.padding, self.groups = stride, padding, groups
        self.weight = Parameter(trunc_normal(rng, (cout, cin // groups, kernel_size)))
        self.bias = Parameter(np.zeros(cout, dtype=np.float32))

    def forward(self, x):
        return F.conv1d(x, self.weight, self.bias, self.stride, self.padding, self.groups)


class Linear(Module):
    def __init__(self, din: int, dout: int, rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.weight = Parameter(trunc_normal(rng, (dout, din)))
        self.bias = Parameter(np.zeros(dout, dtype=np.float32))

    def forward(self, x):
        return F.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    """Channel layer norm; ``channels_first`` normalizes axis 1 of (B, C, L)."""

    def __init__(self, dim: int, eps: float = 1e-6, channels_first: bool = False):
        self.eps = eps
        self.axis = 1 if channels_first else -1
        self.weight = Parameter(np.ones(dim, dtype=np.float32))
        self.bias = Parameter(np.zeros(dim, dtype=np.float32))

    def forward(self, x):
        return F.layer_norm(x, self.weight, self.bias, axis=self.axis, eps=self.eps)


class GRN(Module):
    """Global response normalization over channels-last (B, L, C) input."""

    def __init__(self, dim: int, eps: float = 1e-6):
        self.eps = eps
        self.gamma = Parameter(np.zeros(dim, dtype=np.float32))
        self.beta = Parameter(np.zeros(dim, dtype=np.float32))

    def forward(self, x):
        return F.grn(x, self.gamma, self.beta, channel_axis=-1, eps=self.eps)
