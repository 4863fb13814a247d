"""Teacher-student semi-supervised training loop, metrics and ablations.

``experiment`` and ``ablation`` are imported from their modules directly; they
depend on :mod:`mumkit.utils.config`, which itself builds on this package.
"""

from mumkit.training.config import AugmentMode, TrainConfig
from mumkit.training.loss import LabeledBatch, LossResult, UnlabeledBatch, total_loss
from mumkit.training.metrics import MetricsRow, evaluate, mean_ap, pck
from mumkit.training.trainer import TrainState, init_train_state, train_epoch

__all__ = [
    "AugmentMode",
    "TrainConfig",
    "LabeledBatch",
    "UnlabeledBatch",
    "LossResult",
    "total_loss",
    "MetricsRow",
    "pck",
    "mean_ap",
    "evaluate",
    "TrainState",
    "init_train_state",
    "train_epoch",
]
