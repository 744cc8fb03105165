"""SGD with momentum, Adam, and the cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimizerState:
    kind: str  # "sgd" or "adam"
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    slots: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")

    def scalars(self) -> dict:
        return {"kind": self.kind, "momentum": self.momentum, "beta1": self.beta1,
                "beta2": self.beta2, "eps": self.eps, "weight_decay": self.weight_decay,
                "step": self.step}

    def arrays(self) -> dict[str, np.ndarray]:
        return {f"{slot}.{name}": arr for slot, per in sorted(self.slots.items())
                for name, arr in per.items()}

    @classmethod
    def restore(cls, scalars: dict, arrays: dict[str, np.ndarray]) -> "OptimizerState":
        state = cls(**scalars)
        for key, arr in arrays.items():
            slot, name = key.split(".", 1)
            state.slots.setdefault(slot, {})[name] = arr
        return state


def _decayed(p, g, wd):
    return g + wd * p if wd else g


def sgd_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: OptimizerState,
             lr: float):
    """v <- momentum * v + g;  p <- p - lr * v  (in place)."""
    bufs = state.slots.setdefault("momentum", {})
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        g = _decayed(p, g, state.weight_decay)
        v = bufs.get(name)
        if v is None:
            v = bufs[name] = np.zeros_like(p)
        v *= state.momentum
        v += g
        p -= (lr * v).astype(p.dtype, copy=False)
    state.step += 1
    return params, state


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: OptimizerState,
              lr: float):
    """Bias-corrected Adam update (in place)."""
    m_slot = state.slots.setdefault("adam_m", {})
    v_slot = state.slots.setdefault("adam_v", {})
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        g = _decayed(p, g, state.weight_decay)
        m = m_slot.get(name)
        if m is None:
            m = m_slot[name] = np.zeros_like(p)
            v_slot[name] = np.zeros_like(p)
        v = v_slot[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= (lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.dtype, copy=False)
    return params, state


def cosine_lr(step: int, total_steps: int, lr0: float, lr_min: float = 0.0) -> float:
    if total_steps <= 0:
        return lr0
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + math.cos(math.pi * step / total_steps))


class Optimizer:
    """Applies an update rule to the non-frozen parameters of some modules."""

    def __init__(self, named_params, state: OptimizerState):
        self.named = list(named_params)
        self.state = state
        self._rule = sgd_step if state.kind == "sgd" else adam_step

    def step(self, lr: float):
        params, grads = {}, {}
        for name, p in self.named:
            if p.frozen or p.grad is None:
                continue
            params[name] = p.data
            grads[name] = p.grad
        self._rule(params, grads, self.state, lr)

    def zero_grad(self):
        for _, p in self.named:
            p.grad = None
