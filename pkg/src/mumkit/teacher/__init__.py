"""Teacher network for the teacher-student loop (Single / EMA / EMAN)."""

from mumkit.teacher.interface import TeacherUpdater
from mumkit.teacher.lifecycle import init_from_student, teacher_infer, update
from mumkit.teacher.types import TeacherMode, TeacherState
from mumkit.teacher.updaters import EmanUpdater, EmaUpdater, SingleUpdater

__all__ = [
    "TeacherMode",
    "TeacherState",
    "TeacherUpdater",
    "SingleUpdater",
    "EmaUpdater",
    "EmanUpdater",
    "init_from_student",
    "update",
    "teacher_infer",
]
