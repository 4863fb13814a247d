"""Supervised plus weighted unsupervised heatmap loss with exact gradients."""

from dataclasses import dataclass, field

import numpy as np
from loguru import logger

from mumkit.data.augment import choose_joints, cutout_patches
from mumkit.data.render import decode_heatmaps
from mumkit.errors import ConfigurationError
from mumkit.mixing import MixSpec
from mumkit.model.posenet import PoseNet
from mumkit.nn.layers import mse_backward, mse_forward
from mumkit.teacher import TeacherState, teacher_infer
from mumkit.tensorgrid import FeatureBatch
from mumkit.training.config import AugmentMode, TrainConfig


@dataclass
class LabeledBatch:
    images: FeatureBatch  # (n, 1, h, w)
    heatmaps: FeatureBatch  # (n, K, h', w')
    visibility: np.ndarray  # (n, K) bool


@dataclass
class UnlabeledBatch:
    """Weakly augmented unlabeled images; the strong branch is derived from these."""

    weak: FeatureBatch


@dataclass
class LossResult:
    total: float
    supervised: float
    unsupervised: float
    grads: dict[str, np.ndarray]
    mask_sites: list[str] = field(default_factory=list)


def heatmap_loss(
    pred: FeatureBatch, target: FeatureBatch, visibility: np.ndarray | None = None
) -> tuple[float, FeatureBatch]:
    """Visibility-weighted heatmap MSE averaged over images, and its gradient.

    Every image has the same number of heatmap cells, so the mean over all
    elements equals the mean of the per-image losses.
    """
    weight = None
    if visibility is not None:
        weight = np.asarray(visibility, dtype=np.float64)[:, :, None, None]
    value, trace = mse_forward(pred, target, weight)
    return value, mse_backward(trace)


def student_spec(mix: MixSpec, mode: AugmentMode) -> MixSpec:
    """MUM variants are Pose-MUM with the feature-level mix probability at 0."""
    if mode.feature_mixing:
        return mix
    return mix.model_copy(update={"mix_prob": 0.0})


def strong_images(
    weak: FeatureBatch,
    pseudo: FeatureBatch,
    cfg: TrainConfig,
    rng: np.random.Generator,
    image_size: tuple[int, int],
) -> FeatureBatch:
    """Cutout for the cutout modes, centred on the teacher's predicted joints."""
    if not cfg.augment.cuts_out:
        return weak
    if cfg.cutout_joints > pseudo.c:
        raise ConfigurationError(
            f"train.cutout_joints={cfg.cutout_joints} exceeds K={pseudo.c}"
        )
    centres = decode_heatmaps(pseudo.data, image_size)
    out = weak.data.copy()
    everyone = np.ones(pseudo.c, dtype=bool)
    for i in range(weak.n):
        chosen = choose_joints(everyone, rng, cfg.cutout_joints)
        out[i, 0] = cutout_patches(out[i, 0], centres[i, chosen], cfg.cutout_size)
    return FeatureBatch(out)


def unsupervised_term(
    unsup: UnlabeledBatch,
    student: PoseNet,
    teacher: TeacherState,
    cfg: TrainConfig,
    mix: MixSpec,
    rng: np.random.Generator,
) -> tuple[float, dict[str, np.ndarray], list[str]]:
    """Student (strong branch) regressed onto the teacher's pseudo heatmaps."""
    pseudo = teacher_infer(teacher, unsup.weak)
    strong = strong_images(unsup.weak, pseudo, cfg, rng, student.cfg.input_size)
    if cfg.augment.mixes:
        pred, stack, trace = student.forward_student(strong, student_spec(mix, cfg.augment), rng)
        sites = stack.sites()
    else:
        pred, trace = student.forward_train(strong)
        sites = []
    # pseudo heatmaps are plain arrays: nothing flows back into the teacher
    value, grad = heatmap_loss(pred, pseudo)
    return value, student.backward_student(trace, grad), sites


def total_loss(
    sup: LabeledBatch,
    unsup: UnlabeledBatch | None,
    student: PoseNet,
    teacher: TeacherState,
    cfg: TrainConfig,
    mix: MixSpec,
    rng: np.random.Generator,
) -> LossResult:
    """L = L_sup + lambda_u * L_unsup with matching parameter gradients.

    An empty (None) unlabeled batch, or SUPERVISED_ONLY mode, reduces to the
    supervised term. With lambda_u = 0 the unsupervised value is still
    reported but contributes no gradient.

    Raises:
        ConfigurationError: the unlabeled batch is not whole groups of n_group
    """
    if unsup is not None and cfg.augment.uses_unlabeled and unsup.weak.n % mix.n_group:
        raise ConfigurationError(
            f"unlabeled batch of {unsup.weak.n} images is not whole groups of n_group={mix.n_group}"
        )
    pred, trace = student.forward_train(sup.images)
    sup_value, sup_grad = heatmap_loss(pred, sup.heatmaps, sup.visibility)
    grads = student.backward_student(trace, sup_grad)

    unsup_value = 0.0
    sites: list[str] = []
    if unsup is not None and cfg.augment.uses_unlabeled:
        unsup_value, unsup_grads, sites = unsupervised_term(unsup, student, teacher, cfg, mix, rng)
        if cfg.lambda_u > 0.0:
            for name, g in unsup_grads.items():
                grads[name] = grads[name] + cfg.lambda_u * g

    total = sup_value + cfg.lambda_u * unsup_value
    logger.debug(
        f"loss sup={sup_value:.6f} unsup={unsup_value:.6f} total={total:.6f} masks={sites}"
    )
    return LossResult(total, sup_value, unsup_value, grads, sites)
