"""Single, EMA and EMAN teacher update rules."""

import numpy as np
from loguru import logger

from mumkit.errors import ShapeError
from mumkit.model.posenet import PoseNet
from mumkit.teacher.interface import TeacherUpdater
from mumkit.teacher.types import TeacherMode, TeacherState


def moving_average(teacher: np.ndarray, student: np.ndarray, decay: float) -> np.ndarray:
    """tau * teacher + (1 - tau) * student, evaluated as student + tau * (teacher - student).

    The endpoints are handled exactly: tau=1 keeps the teacher, tau=0 copies
    the student.
    """
    if decay == 1.0:
        return teacher.copy()
    if decay == 0.0:
        return student.copy()
    return student + decay * (teacher - student)


def _check_shapes(
    teacher: dict[str, np.ndarray], student: dict[str, np.ndarray], what: str
) -> None:
    if teacher.keys() != student.keys():
        missing = sorted(set(teacher) ^ set(student))
        raise ShapeError(f"teacher/student {what} names differ: {missing}")
    for name, value in teacher.items():
        if value.shape != student[name].shape:
            raise ShapeError(
                f"teacher/student {what} {name!r}: {value.shape} vs {student[name].shape}"
            )


def average_trainables(state: TeacherState, student: PoseNet, decay: float) -> None:
    teacher_params = state.network.parameters()
    student_params = student.parameters()
    _check_shapes(teacher_params, student_params, "parameter")
    for name, live in teacher_params.items():
        live[...] = moving_average(live, student_params[name], decay)


def average_bn_statistics(state: TeacherState, student: PoseNet, decay: float) -> None:
    teacher_buffers = state.network.buffers()
    student_buffers = student.buffers()
    _check_shapes(teacher_buffers, student_buffers, "buffer")
    for name, value in teacher_buffers.items():
        target = student_buffers[name]
        if state.average_std and name.endswith("running_var"):
            std = moving_average(np.sqrt(value), np.sqrt(target), decay)
            state.network.set_buffer(name, std * std)
        else:
            state.network.set_buffer(name, moving_average(value, target, decay))


class SingleUpdater(TeacherUpdater):
    """Teacher shares the student's weights and statistics after every step."""

    mode = TeacherMode.SINGLE

    def update(self, state: TeacherState, student: PoseNet) -> None:
        average_trainables(state, student, 0.0)
        average_bn_statistics(state, student, 0.0)


class EmaUpdater(TeacherUpdater):
    """Moving average of trainable parameters only; BN statistics stay put."""

    mode = TeacherMode.EMA

    def update(self, state: TeacherState, student: PoseNet) -> None:
        average_trainables(state, student, state.decay)


class EmanUpdater(TeacherUpdater):
    """Moving average of trainable parameters and BN running statistics."""

    mode = TeacherMode.EMAN

    def update(self, state: TeacherState, student: PoseNet) -> None:
        average_trainables(state, student, state.decay)
        average_bn_statistics(state, student, state.decay)


UPDATERS: dict[TeacherMode, TeacherUpdater] = {
    u.mode: u for u in (SingleUpdater(), EmaUpdater(), EmanUpdater())
}


def get_updater(mode: TeacherMode) -> TeacherUpdater:
    updater = UPDATERS.get(mode)
    if updater is None:
        logger.error(f"No teacher updater registered for {mode}")
        raise ValueError(f"unsupported teacher mode: {mode}")
    return updater
