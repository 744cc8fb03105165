"""Differentiable primitives.

Every op returns a :class:`Tensor` and, when any input requires grad,
registers a closure mapping the output gradient to input gradients.
Signal tensors are laid out (batch, channels, length).
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import EmptyMask, InvalidTarget, ShapeMismatch
from .tensor import Tensor, as_tensor, make_result

_GELU_K = math.sqrt(2.0 / math.pi)
_GELU_C = 0.044715


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# elementwise / structural ----------------------------------------------------

def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    sa, sb = a.shape, b.shape
    return make_result(a.data + b.data, (a, b),
                       lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a: Tensor) -> Tensor:
    return make_result(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    ad, bd = a.data, b.data

    def backward(g):
        ga = _unbroadcast(g * bd, ad.shape) if a.requires_grad else None
        gb = _unbroadcast(g * ad, bd.shape) if b.requires_grad else None
        return ga, gb

    return make_result(ad * bd, (a, b), backward)


def reshape(a: Tensor, shape) -> Tensor:
    src = a.shape
    return make_result(a.data.reshape(shape), (a,), lambda g: (g.reshape(src),))


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return make_result(np.ascontiguousarray(a.data.transpose(axes)), (a,),
                       lambda g: (g.transpose(inv),))


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return make_result(np.asarray(a.data.sum(), dtype=a.dtype), (a,),
                       lambda g: (np.broadcast_to(g, shape).copy(),))


def mean_all(a: Tensor) -> Tensor:
    shape, n = a.shape, a.data.size
    return make_result(np.asarray(a.data.mean(), dtype=a.dtype), (a,),
                       lambda g: (np.full(shape, g / n, dtype=a.dtype),))


# layers ------------------------------------------------------------------------

def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1,
           padding: int = 0, groups: int = 1) -> Tensor:
    """Cross-correlation with zero padding; weight is (Cout, Cin/groups, K)."""
    if x.ndim != 3 or weight.ndim != 3:
        raise ShapeMismatch(f"conv1d expects 3-d input and weight, got {x.shape}, {weight.shape}")
    B, Cin, L = x.shape
    Cout, Cg, K = weight.shape
    if Cin % groups or Cout % groups or Cg != Cin // groups:
        raise ShapeMismatch(f"channels {Cin}->{Cout} incompatible with weight {weight.shape} and groups={groups}")
    if L + 2 * padding < K:
        raise ShapeMismatch(f"length {L} with padding {padding} shorter than kernel {K}")
    Lout = (L + 2 * padding - K) // stride + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    cols = sliding_window_view(xp, K, axis=2)[:, :, ::stride][:, :, :Lout]  # (B, Cin, Lout, K)
    w = weight.data
    depthwise = groups == Cin and Cout == Cin and Cg == 1

    if groups == 1:
        out = np.tensordot(cols, w, axes=([1, 3], [1, 2])).transpose(0, 2, 1)
    elif depthwise:
        out = np.zeros((B, Cout, Lout), dtype=xp.dtype)
        for k in range(K):
            out += w[None, :, 0, k, None] * cols[:, :, :, k]
    else:
        cg = cols.reshape(B, groups, Cg, Lout, K)
        wg = w.reshape(groups, Cout // groups, Cg, K)
        out = np.einsum("bgclk,gock->bgol", cg, wg).reshape(B, Cout, Lout)
    out = np.ascontiguousarray(out)
    if bias is not None:
        out = out + bias.data[None, :, None]

    def backward(g):
        gx = gw = gb = None
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2))
        if weight.requires_grad:
            if groups == 1:
                gw = np.tensordot(g, cols, axes=([0, 2], [0, 2]))
            elif depthwise:
                gw = np.einsum("bcl,bclk->ck", g, cols)[:, None, :]
            else:
                gg = g.reshape(B, groups, Cout // groups, Lout)
                gw = np.einsum("bgol,bgclk->gock", gg, cols.reshape(B, groups, Cg, Lout, K))
                gw = gw.reshape(Cout, Cg, K)
        if x.requires_grad:
            if groups == 1:
                gcols = np.tensordot(g, w, axes=([1], [0])).transpose(0, 2, 1, 3)  # (B, Cin, Lout, K)
            elif depthwise:
                gcols = g[:, :, :, None] * w[None, :, 0, None, :]
            else:
                gg = g.reshape(B, groups, Cout // groups, Lout)
                gcols = np.einsum("bgol,gock->bgclk", gg, w.reshape(groups, Cout // groups, Cg, K))
                gcols = gcols.reshape(B, Cin, Lout, K)
            gxp = np.zeros(xp.shape, dtype=xp.dtype)
            span = stride * (Lout - 1) + 1
            for k in range(K):
                gxp[:, :, k:k + span:stride] += gcols[:, :, :, k]
            gx = gxp[:, :, padding:padding + L] if padding else gxp
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out, parents, backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map over the last axis; weight is (Dout, Din)."""
    Dout, Din = weight.shape
    if x.shape[-1] != Din:
        raise ShapeMismatch(f"linear expects last dim {Din}, got {x.shape}")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, Din)
    w = weight.data
    out = x2 @ w.T
    if bias is not None:
        out += bias.data

    def backward(g):
        g2 = g.reshape(-1, Dout)
        gx = (g2 @ w).reshape(x.shape) if x.requires_grad else None
        gw = g2.T @ x2 if weight.requires_grad else None
        gb = g2.sum(axis=0) if bias is not None and bias.requires_grad else None
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out.reshape(*lead, Dout), parents, backward)


def _axis_shape(ndim: int, axis: int, n: int) -> tuple[int, ...]:
    shape = [1] * ndim
    shape[axis] = n
    return tuple(shape)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, axis: int = -1, eps: float = 1e-6) -> Tensor:
    """Normalize over ``axis`` (the channel axis), then scale and shift."""
    axis = axis % x.ndim
    C = x.shape[axis]
    pshape = _axis_shape(x.ndim, axis, C)
    mu = x.data.mean(axis=axis, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    gm = gamma.data.reshape(pshape)
    out = xhat * gm + beta.data.reshape(pshape)
    red = tuple(i for i in range(x.ndim) if i != axis)

    def backward(g):
        gx = gg = gb = None
        if gamma.requires_grad:
            gg = (g * xhat).sum(axis=red).reshape(gamma.shape)
        if beta.requires_grad:
            gb = g.sum(axis=red).reshape(beta.shape)
        if x.requires_grad:
            dxhat = g * gm
            gx = inv * (dxhat - dxhat.mean(axis=axis, keepdims=True)
                        - xhat * (dxhat * xhat).mean(axis=axis, keepdims=True))
        return gx, gg, gb

    return make_result(out, (x, gamma, beta), backward)


def gelu(x: Tensor) -> Tensor:
    """Tanh-approximated GELU."""
    xd = x.data
    x2 = xd * xd
    t = np.tanh(_GELU_K * xd * (1.0 + _GELU_C * x2))
    out = 0.5 * xd * (1.0 + t)

    def backward(g):
        dt = (1.0 - t * t) * _GELU_K * (1.0 + 3.0 * _GELU_C * x2)
        return (g * (0.5 * (1.0 + t) + 0.5 * xd * dt),)

    return make_result(out, (x,), backward)


def grn(x: Tensor, gamma: Tensor, beta: Tensor, channel_axis: int = 1, eps: float = 1e-6) -> Tensor:
    """Global response normalization for 3-d tensors.

    Channel L2 norms over positions are divided by their channel mean; the
    result rescales ``x`` and is added back as a residual, so zero
    ``gamma``/``beta`` give the identity.
    """
    if x.ndim != 3:
        raise ShapeMismatch(f"grn expects a 3-d tensor, got {x.shape}")
    caxis = channel_axis % 3
    saxis = 2 if caxis == 1 else 1
    C = x.shape[caxis]
    pshape = _axis_shape(3, caxis, C)
    xd = x.data
    gnorm = np.sqrt((xd * xd).sum(axis=saxis, keepdims=True))
    denom = gnorm.mean(axis=caxis, keepdims=True) + eps
    n = gnorm / denom
    gm = gamma.data.reshape(pshape)
    out = gm * (xd * n) + beta.data.reshape(pshape) + xd

    def backward(g):
        gx = ggam = gbet = None
        if gamma.requires_grad:
            ggam = (g * xd * n).sum(axis=(0, saxis)).reshape(gamma.shape)
        if beta.requires_grad:
            gbet = g.sum(axis=(0, saxis)).reshape(beta.shape)
        if x.requires_grad:
            dn = (g * gm * xd).sum(axis=saxis, keepdims=True)
            dg = dn / denom - (dn * gnorm).sum(axis=caxis, keepdims=True) / (denom * denom * C)
            safe = np.where(gnorm > 0, gnorm, 1.0)
            gx = g * (gm * n + 1.0) + dg * np.where(gnorm > 0, xd / safe, 0.0)
        return gx, ggam, gbet

    return make_result(out, (x, gamma, beta), backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """(B, C, L) -> (B, C)."""
    if x.ndim != 3:
        raise ShapeMismatch(f"global_avg_pool expects (B, C, L), got {x.shape}")
    L = x.shape[2]
    return make_result(x.data.mean(axis=2), (x,),
                       lambda g: (np.repeat(g[:, :, None] / L, L, axis=2),))


def softmax_cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean over the batch of -sum(targets * log_softmax(logits))."""
    t = np.asarray(targets.data if isinstance(targets, Tensor) else targets, dtype=logits.dtype)
    if t.shape != logits.shape:
        raise ShapeMismatch(f"targets {t.shape} vs logits {logits.shape}")
    if not np.allclose(t.sum(axis=1), 1.0, rtol=0, atol=1e-6):
        raise InvalidTarget("target rows must sum to 1")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    B = logits.shape[0]
    loss = np.asarray(-(t * logp).sum() / B, dtype=logits.dtype)

    def backward(g):
        p = np.exp(logp)
        return (g * (p * t.sum(axis=1, keepdims=True) - t) / B,)

    return make_result(loss, (logits,), backward)


def mse_masked(pred: Tensor, target, mask) -> Tensor:
    """Mean squared error over positions where ``mask`` is 1."""
    tgt = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=pred.dtype)
    m = np.asarray(mask, dtype=pred.dtype)
    if tgt.shape != pred.shape or m.shape != pred.shape:
        raise ShapeMismatch(f"pred {pred.shape}, target {tgt.shape}, mask {m.shape} must agree")
    n = m.sum()
    if n <= 0:
        raise EmptyMask("mask selects no samples")
    diff = (pred.data - tgt) * m
    loss = np.asarray((diff * diff).sum() / n, dtype=pred.dtype)
    return make_result(loss, (pred,), lambda g: (g * 2.0 * diff / n,))
