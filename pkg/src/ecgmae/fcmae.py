"""Fully convolutional masked-autoencoder pieces for beat windows.

Masking works on 32-sample patches, which line up one-to-one with the
encoder's final feature positions (480 / 32 = 15). Sparse convolution is
emulated by zeroing masked positions after the stem and after each stage,
so visible features never depend on masked content.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nn_core as nn
from .convnext1d import Block, Encoder, STEM_STRIDE, TOTAL_STRIDE
from .errors import EmptyMask, ShapeMismatch
from .rng import stream

PATCH_SIZE = TOTAL_STRIDE
DEFAULT_MASK_RATIO = 0.6


def n_masked(n_patches: int, mask_ratio: float) -> int:
    return int(math.floor(mask_ratio * n_patches + 0.5))


@dataclass(frozen=True)
class MaskPlan:
    """Which patches of one segment are hidden."""

    masked: tuple[int, ...]
    n_patches: int = 15
    mask_ratio: float = DEFAULT_MASK_RATIO
    patch_size: int = PATCH_SIZE

    def as_array(self) -> np.ndarray:
        m = np.zeros(self.n_patches, dtype=bool)
        m[list(self.masked)] = True
        return m


def generate_mask(n_patches: int, mask_ratio: float, rng: np.random.Generator) -> MaskPlan:
    """Uniformly random set of ``round(mask_ratio * n_patches)`` patches."""
    if not 0.0 <= mask_ratio <= 1.0:
        raise ValueError("mask_ratio must lie in [0, 1]")
    k = n_masked(n_patches, mask_ratio)
    chosen = np.sort(rng.permutation(n_patches)[:k])
    return MaskPlan(tuple(int(i) for i in chosen), n_patches, mask_ratio)


def patch_mask(plan, batch: int) -> np.ndarray:
    """(batch, n_patches) bool array from one plan or one plan per row."""
    if isinstance(plan, MaskPlan):
        return np.broadcast_to(plan.as_array(), (batch, plan.n_patches))
    plans = list(plan)
    if len(plans) != batch:
        raise ShapeMismatch(f"{len(plans)} mask plans for a batch of {batch}")
    return np.stack([p.as_array() for p in plans])


def _keep(mask: np.ndarray, per_patch: int, dtype) -> np.ndarray:
    """(B, 1, n_patches * per_patch) multiplier: 0 on masked positions."""
    return (~np.repeat(mask, per_patch, axis=1))[:, None, :].astype(dtype)


def apply_mask(x, plan) -> nn.Tensor:
    """Zero every sample inside a masked patch of a (B, 1, L) batch."""
    x = nn.as_tensor(x)
    if x.ndim != 3:
        raise ShapeMismatch(f"apply_mask expects (B, 1, L), got {x.shape}")
    m = patch_mask(plan, x.shape[0])
    if m.shape[1] * PATCH_SIZE != x.shape[2]:
        raise ShapeMismatch(f"{m.shape[1]} patches do not cover length {x.shape[2]}")
    return x * _keep(m, PATCH_SIZE, x.dtype)


def masked_encode(encoder: Encoder, x, plan) -> nn.Tensor:
    """Encoder forward that keeps masked positions at zero at every scale."""
    x = nn.as_tensor(x)
    encoder.check_input(x)
    m = patch_mask(plan, x.shape[0])
    n_pos = x.shape[2] // TOTAL_STRIDE
    if m.shape[1] != n_pos:
        raise ShapeMismatch(f"plan has {m.shape[1]} patches, features have {n_pos} positions")
    x = apply_mask(x, plan)
    per_patch = PATCH_SIZE // STEM_STRIDE
    h = encoder.stem(x) * _keep(m, per_patch, x.dtype)
    for i, stage in enumerate(encoder.stages):
        if i > 0:
            h = encoder.downsample[i - 1](h)
            per_patch //= 2
        h = stage(h) * _keep(m, per_patch, x.dtype)
    return encoder.norm(h) * _keep(m, 1, x.dtype)


class Decoder(nn.Module):
    """Project -> mask token fill -> one ConvNeXt block -> per-patch linear head."""

    def __init__(self, in_dim: int, decoder_dim: int = 64, patch_size: int = PATCH_SIZE, seed: int = 0):
        rng = stream(seed, "init.decoder")
        self.in_dim, self.decoder_dim, self.patch_size = in_dim, decoder_dim, patch_size
        self.proj = nn.Conv1d(in_dim, decoder_dim, 1, rng=rng)
        self.mask_token = nn.Parameter(np.zeros(decoder_dim, dtype=np.float32))
        self.block = Block(decoder_dim, rng)
        self.pred = nn.Linear(decoder_dim, patch_size, rng=rng)

    def hidden(self, features, plan) -> nn.Tensor:
        """Decoder state right before the per-patch head, (B, P, decoder_dim)."""
        features = nn.as_tensor(features)
        if features.ndim != 3 or features.shape[1] != self.in_dim:
            raise ShapeMismatch(f"decoder expects (B, {self.in_dim}, P), got {features.shape}")
        B, _, P = features.shape
        m = patch_mask(plan, B)
        if m.shape[1] != P:
            raise ShapeMismatch(f"plan has {m.shape[1]} patches, features have {P} positions")
        mf = m[:, None, :].astype(features.dtype)
        h = self.proj(features) * (1.0 - mf)
        h = h + self.mask_token.reshape(1, self.decoder_dim, 1) * mf
        return self.block(h).transpose(0, 2, 1)

    def head(self, hidden) -> nn.Tensor:
        B, P, _ = hidden.shape
        return self.pred(hidden).reshape(B, P * self.patch_size)

    def forward(self, features, plan):
        return self.head(self.hidden(features, plan))

    def to_dict(self) -> dict:
        return {"in_dim": self.in_dim, "decoder_dim": self.decoder_dim, "patch_size": self.patch_size}


def decode(features, plan, decoder: Decoder) -> nn.Tensor:
    """(B, 8C, 15) features -> (B, 480) reconstruction."""
    return decoder(features, plan)


def pretrain_loss(recon, original, plan) -> nn.Tensor:
    """Squared error averaged over the samples of masked patches only."""
    recon = nn.as_tensor(recon)
    orig = np.asarray(original.data if isinstance(original, nn.Tensor) else original, dtype=recon.dtype)
    orig = orig.reshape(recon.shape)
    m = patch_mask(plan, recon.shape[0])
    if not m.any():
        raise EmptyMask("no masked patches to reconstruct")
    sample_mask = np.repeat(m, PATCH_SIZE, axis=1)
    return nn.mse_masked(recon, orig, sample_mask)


def reconstruct_demo(encoder: Encoder, decoder: Decoder, segment, plan: MaskPlan):
    """(original, masked input, reconstruction) for one 480-sample window."""
    orig = np.asarray(segment.samples if hasattr(segment, "samples") else segment, dtype=np.float32)
    x = orig.reshape(1, 1, -1)
    with nn.no_grad():
        masked = apply_mask(x, plan)
        recon = decoder(masked_encode(encoder, x, plan), plan)
    return orig.copy(), masked.data.reshape(-1).copy(), recon.data.reshape(-1).copy()


def write_reconstruction_csv(path, triplet) -> None:
    original, masked, recon = triplet
    rows = ["original,masked,reconstructed"]
    rows += [f"{a!r},{b!r},{c!r}" for a, b, c in zip(original.tolist(), masked.tolist(), recon.tolist())]
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")
