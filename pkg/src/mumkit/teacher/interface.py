"""Interface for teacher update rules."""

from abc import ABC, abstractmethod

from mumkit.model.posenet import PoseNet
from mumkit.teacher.types import TeacherMode, TeacherState


class TeacherUpdater(ABC):
    """Abstract base class for rules that move the teacher toward the student."""

    mode: TeacherMode

    @abstractmethod
    def update(self, state: TeacherState, student: PoseNet) -> None:
        """
        Apply one update after the student's optimizer step.

        Args:
            state: Teacher state, modified in place
            student: Student network after its parameter update
        """
        pass
