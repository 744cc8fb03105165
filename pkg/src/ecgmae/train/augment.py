"""Fine-tuning augmentations: mixup and additive white noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidConfig, InvalidLambda


@dataclass(frozen=True)
class AugmentConfig:
    mixup_alpha: float = 0.2
    noise_sigma: float = 0.01
    use_mixup: bool = True
    use_noise: bool = True

    def __post_init__(self):
        if self.use_mixup and not self.mixup_alpha > 0:
            raise InvalidConfig("mixup_alpha must be positive when mixup is enabled")
        if self.noise_sigma < 0:
            raise InvalidConfig("noise_sigma must be non-negative")


def mixup(x1, y1, x2, y2, lam: float):
    """Convex combination of two inputs and their label distributions."""
    if not 0.0 <= lam <= 1.0:
        raise InvalidLambda(f"lambda must lie in [0, 1], got {lam}")
    if lam == 1.0:
        return np.array(x1, copy=True), np.array(y1, copy=True)
    x = lam * np.asarray(x1) + (1.0 - lam) * np.asarray(x2)
    y = lam * np.asarray(y1) + (1.0 - lam) * np.asarray(y2)
    return x, y


def mixup_batch(x: np.ndarray, y: np.ndarray, alpha: float, rng: np.random.Generator):
    """Mix each row with a random partner; one lambda ~ Beta(alpha, alpha) per batch."""
    lam = float(rng.beta(alpha, alpha))
    perm = rng.permutation(len(x))
    xm, ym = mixup(x, y, x[perm], y[perm], lam)
    return xm.astype(x.dtype, copy=False), ym, lam


def add_noise(x: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """x + N(0, sigma^2) i.i.d.; no clipping back into [0, 1]."""
    if sigma == 0:
        return np.array(x, copy=True)
    return (x + rng.normal(0.0, sigma, size=np.shape(x))).astype(np.asarray(x).dtype, copy=False)
