"""Masked pre-training and classifier fine-tuning loops."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .. import nn_core as nn
from ..convnext1d import ClassifierHead, Encoder, forward_features
from ..errors import EmptyDataset, EmptyMask, InvalidConfig, UnfrozenEncoder, UnlabeledSegment
from ..fcmae import DEFAULT_MASK_RATIO, Decoder, generate_mask, masked_encode, n_masked, pretrain_loss
from ..preprocess.segments import SEGMENT_LENGTH, UNLABELED, SegmentDataset
from ..rng import stream
from .augment import AugmentConfig, add_noise, mixup_batch
from .checkpoint import Checkpoint
from .optim import Optimizer, OptimizerState, cosine_lr

log = logging.getLogger(__name__)

N_CLASSES = 5


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int
    epochs: int
    lr_initial: float
    lr_min: float = 0.0
    seed: int = 0
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    mask_ratio: float = DEFAULT_MASK_RATIO
    momentum: float = 0.9
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise InvalidConfig("batch_size and epochs must be positive")
        if not self.lr_initial > 0 or self.lr_min < 0:
            raise InvalidConfig("learning rates must be positive (lr_min may be 0)")
        if not 0.0 <= self.mask_ratio <= 1.0:
            raise InvalidConfig("mask_ratio must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["augment"] = AugmentConfig(**d.get("augment", {}))
        return cls(**d)


PRETRAIN_PRESET = TrainConfig(batch_size=512, epochs=500, lr_initial=0.01, weight_decay=1e-4)
FINETUNE_PRESET = TrainConfig(batch_size=1024, epochs=100, lr_initial=3e-4)


def _as_samples(data) -> np.ndarray:
    if isinstance(data, SegmentDataset):
        return data.samples
    return np.asarray(data, dtype=np.float32).reshape(-1, SEGMENT_LENGTH)


def _write_log(path, history, with_val: bool):
    if path is None:
        return
    cols = ["epoch", "loss", "lr"] + (["val_accuracy"] if with_val else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in history:
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])


def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def pretrain(encoder: Encoder, decoder: Decoder, data, config: TrainConfig,
             log_path=None) -> Checkpoint:
    """SGD on masked-patch reconstruction; returns the final checkpoint."""
    x_all = _as_samples(data)
    n = len(x_all)
    if n == 0:
        raise EmptyDataset("no segments to pre-train on")
    n_patches = SEGMENT_LENGTH // decoder.patch_size
    if n_masked(n_patches, config.mask_ratio) == 0:
        raise EmptyMask(f"mask_ratio {config.mask_ratio} masks no patches; the loss would be empty")

    bs = min(config.batch_size, n)
    steps_per_epoch = math.ceil(n / bs)
    total = steps_per_epoch * config.epochs
    shuffle_rng = stream(config.seed, "pretrain.shuffle")
    mask_rng = stream(config.seed, "pretrain.mask")
    named = [(f"encoder.{k}", p) for k, p in encoder.named_parameters()] + \
            [(f"decoder.{k}", p) for k, p in decoder.named_parameters()]
    opt = Optimizer(named, OptimizerState("sgd", momentum=config.momentum,
                                          weight_decay=config.weight_decay))
    history = []
    step = 0
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        losses, weights = [], []
        lr = config.lr_initial
        for b in range(steps_per_epoch):
            idx = order[b * bs:(b + 1) * bs]
            x = x_all[idx][:, None, :]
            plans = [generate_mask(n_patches, config.mask_ratio, mask_rng) for _ in idx]
            lr = cosine_lr(step, total, config.lr_initial, config.lr_min)
            recon = decoder(masked_encode(encoder, x, plans), plans)
            loss = pretrain_loss(recon, x[:, 0, :], plans)
            loss.backward()
            opt.step(lr)
            opt.zero_grad()
            losses.append(loss.item())
            weights.append(len(idx))
            step += 1
        mean_loss = float(np.average(losses, weights=weights))
        history.append({"epoch": epoch, "loss": mean_loss, "lr": lr})
        log.info("pretrain epoch %d loss %.6f lr %.3g", epoch, mean_loss, lr)

    _write_log(log_path, history, False)
    arrays = {name: p.data.copy() for name, p in named}
    arrays.update({f"optim.{k}": v.copy() for k, v in opt.state.arrays().items()})
    return Checkpoint(
        config={"mode": "pretrain", "encoder": encoder.config.to_dict(), "decoder": decoder.to_dict(),
                "train": config.to_dict()},
        arrays=arrays,
        meta={"epoch": config.epochs, "history": history, "optimizer": opt.state.scalars(),
              "rng": {"shuffle": _rng_state(shuffle_rng), "mask": _rng_state(mask_rng)}},
    )


def one_hot(labels: np.ndarray, n_classes: int = N_CLASSES) -> np.ndarray:
    out = np.zeros((len(labels), n_classes), dtype=np.float32)
    out[np.arange(len(labels)), labels.astype(np.int64)] = 1.0
    return out


def predict(encoder: Encoder, head: ClassifierHead, samples: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Argmax class per segment, computed without augmentation or masking."""
    preds = []
    with nn.no_grad():
        for i in range(0, len(samples), batch_size):
            x = samples[i:i + batch_size][:, None, :]
            preds.append(np.argmax(head(forward_features(encoder, x)).data, axis=1))
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def finetune(encoder: Encoder, head: ClassifierHead, data: SegmentDataset, config: TrainConfig,
             supervised: bool = False, val: SegmentDataset | None = None, log_path=None) -> Checkpoint:
    """Train the classifier head with Adam on top of a frozen encoder.

    With ``supervised=True`` the encoder is unfrozen and trained jointly,
    which is the from-scratch baseline.
    """
    if len(data) == 0:
        raise EmptyDataset("no labeled segments to fine-tune on")
    if np.any(data.labels == UNLABELED):
        raise UnlabeledSegment("fine-tuning needs every segment labeled")
    if supervised:
        encoder.unfreeze()
    elif any(not p.frozen for p in encoder.parameters()):
        raise UnfrozenEncoder("freeze the encoder before fine-tuning (or pass supervised=True)")
    before = encoder.checksum()

    x_all, y_all = data.samples, one_hot(data.labels, head.n_classes)
    n = len(x_all)
    bs = min(config.batch_size, n)
    steps_per_epoch = math.ceil(n / bs)
    total = steps_per_epoch * config.epochs
    aug = config.augment
    rngs = {k: stream(config.seed, f"finetune.{k}") for k in ("shuffle", "mixup", "noise")}
    named = [(f"head.{k}", p) for k, p in head.named_parameters()]
    if supervised:
        named += [(f"encoder.{k}", p) for k, p in encoder.named_parameters()]
    opt = Optimizer(named, OptimizerState("adam", weight_decay=config.weight_decay))

    history = []
    step = 0
    for epoch in range(1, config.epochs + 1):
        order = rngs["shuffle"].permutation(n)
        losses, weights = [], []
        lr = config.lr_initial
        for b in range(steps_per_epoch):
            idx = order[b * bs:(b + 1) * bs]
            x, y = x_all[idx], y_all[idx]
            if aug.use_mixup:
                x, y, _ = mixup_batch(x, y, aug.mixup_alpha, rngs["mixup"])
            if aug.use_noise and aug.noise_sigma > 0:
                x = add_noise(x, aug.noise_sigma, rngs["noise"])
            lr = cosine_lr(step, total, config.lr_initial, config.lr_min)
            logits = head(forward_features(encoder, x[:, None, :]))
            loss = nn.softmax_cross_entropy(logits, y)
            loss.backward()
            opt.step(lr)
            opt.zero_grad()
            losses.append(loss.item())
            weights.append(len(idx))
            step += 1
        row = {"epoch": epoch, "loss": float(np.average(losses, weights=weights)), "lr": lr}
        if val is not None and len(val):
            row["val_accuracy"] = float(np.mean(predict(encoder, head, val.samples) == val.labels))
        history.append(row)
        log.info("finetune epoch %d loss %.6f", epoch, row["loss"])

    if not supervised and encoder.checksum() != before:
        raise RuntimeError("frozen encoder parameters changed during fine-tuning")
    _write_log(log_path, history, val is not None and len(val) > 0)
    arrays = {f"encoder.{k}": v for k, v in encoder.state_dict().items()}
    arrays.update({f"head.{k}": v for k, v in head.state_dict().items()})
    arrays.update({f"optim.{k}": v.copy() for k, v in opt.state.arrays().items()})
    return Checkpoint(
        config={"mode": "supervised" if supervised else "finetune", "encoder": encoder.config.to_dict(),
                "head": head.to_dict(), "train": config.to_dict()},
        arrays=arrays,
        meta={"epoch": config.epochs, "history": history, "optimizer": opt.state.scalars(),
              "encoder_checksum_before": before, "encoder_checksum_after": encoder.checksum(),
              "rng": {k: _rng_state(r) for k, r in rngs.items()}},
    )


def desk_config(preset: TrainConfig, **overrides) -> TrainConfig:
    """A named preset with small-scale overrides applied."""
    return replace(preset, **overrides)
