"""Optimizers, augmentation, checkpoints and the training loops."""

from .augment import AugmentConfig, add_noise, mixup, mixup_batch
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .loops import (
    FINETUNE_PRESET,
    N_CLASSES,
    PRETRAIN_PRESET,
    TrainConfig,
    desk_config,
    finetune,
    one_hot,
    predict,
    pretrain,
)
from .optim import Optimizer, OptimizerState, adam_step, cosine_lr, sgd_step

__all__ = [
    "FINETUNE_PRESET", "N_CLASSES", "PRETRAIN_PRESET", "AugmentConfig", "Checkpoint",
    "Optimizer", "OptimizerState", "TrainConfig", "adam_step", "add_noise", "cosine_lr",
    "desk_config", "finetune", "load_checkpoint", "mixup", "mixup_batch", "one_hot",
    "predict", "pretrain", "save_checkpoint", "sgd_step",
]
