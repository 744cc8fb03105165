"""Central finite-difference checks for reverse-mode gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numeric_grad(fn: Callable[[], float], arr: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """d fn / d arr by central differences, perturbing ``arr`` in place."""
    grad = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = fn()
        flat[i] = orig - step
        fm = fn()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * step)
    return grad


def check_gradients(forward: Callable[[], Tensor], inputs: Sequence[Tensor],
                    rng: np.random.Generator, step: float = 1e-5, rtol: float = 1e-4,
                    atol: float = 1e-7) -> float:
    """Compare analytic and numeric gradients of a random scalar projection.

    ``forward`` must rebuild the graph from ``inputs`` each call. Returns the
    worst elementwise error normalized by ``atol + rtol * |numeric|``; the
    check passes when this is <= 1.
    """
    out = forward()
    proj = rng.standard_normal(out.shape)

    def scalar() -> float:
        return float((forward().data * proj).sum())

    for t in inputs:
        t.grad = None
    forward().backward(proj.astype(out.dtype))
    worst = 0.0
    for t in inputs:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        numeric = numeric_grad(scalar, t.data, step)
        err = np.abs(analytic - numeric) / (atol + rtol * np.abs(numeric))
        worst = max(worst, float(err.max()) if err.size else 0.0)
    return worst
