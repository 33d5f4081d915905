"""Soft actor-critic in numpy."""

from .agent import (
    SacAgent,
    SacConfig,
    critic_loss,
    critic_targets,
    policy_loss,
    sample_action,
    soft_target_update,
)
from .buffer import Batch, ReplayBuffer
from .mlp import Mlp
from .optim import Adam, exponential_lr
from .train import TrainingResults, load_checkpoint, save_checkpoint, seed_streams, train

__all__ = [
    "Adam",
    "Batch",
    "Mlp",
    "ReplayBuffer",
    "SacAgent",
    "SacConfig",
    "TrainingResults",
    "critic_loss",
    "critic_targets",
    "exponential_lr",
    "load_checkpoint",
    "policy_loss",
    "sample_action",
    "save_checkpoint",
    "seed_streams",
    "soft_target_update",
    "train",
]
