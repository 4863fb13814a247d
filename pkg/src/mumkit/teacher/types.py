"""Teacher modes and state."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from mumkit.model.posenet import PoseNet


class TeacherMode(Enum):
    """How the teacher follows the student."""
    SINGLE = "single"
    EMA = "ema"
    EMAN = "eman"


@dataclass
class TeacherState:
    """Shadow network plus the moving-average bookkeeping.

    The teacher's trainables and BN running statistics live inside
    ``network`` so inference is an ordinary eval-mode forward.
    """
    network: PoseNet
    mode: TeacherMode
    decay: float  # tau
    step: int = 0
    # EMAN: average running std (sqrt of running_var) instead of running_var
    average_std: bool = False

    @property
    def params(self) -> dict[str, np.ndarray]:
        return self.network.parameters()

    @property
    def bn_mean(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.network.buffers().items() if k.endswith("running_mean")}

    @property
    def bn_var(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.network.buffers().items() if k.endswith("running_var")}
