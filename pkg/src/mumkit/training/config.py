"""Training configuration."""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from mumkit.teacher.types import TeacherMode


class AugmentMode(Enum):
    """Strong-branch augmentation applied to the student's unlabeled input."""

    SUPERVISED_ONLY = "supervised_only"
    AFFINE = "affine"
    JOINT_CUTOUT = "joint_cutout"
    MUM = "mum"
    POSE_MUM = "pose_mum"
    MUM_JOINT_CUTOUT = "mum_joint_cutout"

    @property
    def uses_unlabeled(self) -> bool:
        return self is not AugmentMode.SUPERVISED_ONLY

    @property
    def mixes(self) -> bool:
        return self in (AugmentMode.MUM, AugmentMode.POSE_MUM, AugmentMode.MUM_JOINT_CUTOUT)

    @property
    def cuts_out(self) -> bool:
        return self in (AugmentMode.JOINT_CUTOUT, AugmentMode.MUM_JOINT_CUTOUT)

    @property
    def feature_mixing(self) -> bool:
        """Only Pose-MUM mixes intermediate features; MUM variants keep mix_prob at 0."""
        return self is AugmentMode.POSE_MUM


class TrainConfig(BaseModel):
    """Optimisation, teacher and augmentation settings of one run."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    lambda_u: float = Field(default=1.0, ge=0.0)
    epochs: int = Field(default=30, ge=1)
    batch_groups: int = Field(default=2, ge=1)
    labeled_batch: int = Field(default=8, ge=1)
    lr: float = Field(default=1e-3, gt=0.0)
    lr_decay_epochs: tuple[int, ...] = (20, 25)
    lr_decay_factor: float = Field(default=0.1, gt=0.0, le=1.0)
    teacher_mode: TeacherMode = TeacherMode.EMAN
    decay: float = Field(default=0.6, ge=0.0, le=1.0)
    average_std: bool = False
    augment: AugmentMode = AugmentMode.POSE_MUM
    # weak branch (teacher input, labeled images); AFFINE mode uses it as the strong branch too
    affine: bool = True
    max_shift: float = Field(default=4.0, ge=0.0)
    max_scale: float = Field(default=1.15, ge=1.0)
    flip_prob: float = Field(default=0.0, ge=0.0, le=1.0)
    cutout_joints: int = Field(default=2, ge=1)
    cutout_size: int = Field(default=9, ge=1)
    # label-budget sweeps: use only the first n labeled samples (0 = all)
    labeled_limit: int = Field(default=0, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def _milestones_inside_schedule(self) -> "TrainConfig":
        milestones = self.lr_decay_epochs
        if any(b <= a for a, b in zip(milestones, milestones[1:])):
            raise ValueError(f"lr_decay_epochs must be strictly increasing, got {milestones}")
        if milestones and not (0 < milestones[0] and milestones[-1] < self.epochs):
            raise ValueError(
                f"lr_decay_epochs {milestones} must lie inside (0, epochs={self.epochs})"
            )
        return self

    def lr_at(self, epoch: int) -> float:
        """Learning rate for 0-based ``epoch``: one decay per milestone reached."""
        drops = sum(1 for m in self.lr_decay_epochs if epoch >= m)
        return self.lr * self.lr_decay_factor**drops
