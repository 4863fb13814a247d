"""Teacher construction, per-step update and pseudo-label inference."""

from loguru import logger

from mumkit.model.posenet import PoseNet
from mumkit.teacher.types import TeacherMode, TeacherState
from mumkit.teacher.updaters import get_updater
from mumkit.tensorgrid import FeatureBatch


def init_from_student(
    student: PoseNet,
    mode: TeacherMode = TeacherMode.EMAN,
    decay: float = 0.6,
    average_std: bool = False,
) -> TeacherState:
    """Deep copy of the student's trainables and BN statistics, step 0."""
    if not 0.0 <= decay <= 1.0:
        raise ValueError(f"teacher decay must lie in [0, 1], got {decay}")
    state = TeacherState(
        network=student.clone(), mode=mode, decay=decay, average_std=average_std
    )
    logger.debug(f"Initialised {mode.value} teacher with decay {decay}")
    return state


def update(state: TeacherState, student: PoseNet) -> None:
    """Move the teacher toward the student according to ``state.mode``."""
    get_updater(state.mode).update(state, student)
    state.network.version += 1
    state.step += 1


def teacher_infer(state: TeacherState, images: FeatureBatch) -> FeatureBatch:
    """Pseudo heatmaps from an eval-mode teacher forward; no trace, no BN writes."""
    return state.network.forward_plain(images, bn_mode="eval")
