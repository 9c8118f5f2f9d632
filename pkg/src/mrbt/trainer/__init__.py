"""Reinforcement learning with tree rewards and action masks."""

from .core import (
    AblationMode,
    Episode,
    ExpertPolicy,
    MaskViolation,
    NetPolicy,
    QPolicy,
    RandomPolicy,
    TemplateRunner,
    TrainConfig,
    TrainReport,
    evaluate,
    load_policy,
    save_policy,
    train,
)

__all__ = [
    "AblationMode", "Episode", "ExpertPolicy", "MaskViolation", "NetPolicy", "QPolicy", "RandomPolicy",
    "TemplateRunner", "TrainConfig", "TrainReport", "evaluate", "load_policy", "save_policy", "train",
]
