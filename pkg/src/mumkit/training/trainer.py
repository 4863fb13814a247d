"""One epoch of teacher-student training."""

from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np
from loguru import logger

from mumkit.data.augment import affine_image, affine_weak_augment, draw_affine
from mumkit.data.skeleton import SkeletonSpec
from mumkit.data.types import DatasetSplit, PoseSample, UnlabeledSample
from mumkit.errors import NumericError
from mumkit.mixing import MixSpec
from mumkit.model.config import PoseNetConfig
from mumkit.model.posenet import PoseNet
from mumkit.nn.optim import AdamState
from mumkit.teacher import TeacherState, init_from_student, update
from mumkit.tensorgrid import FeatureBatch
from mumkit.training.config import TrainConfig
from mumkit.training.loss import LabeledBatch, UnlabeledBatch, total_loss
from mumkit.training.metrics import MetricsRow, evaluate


class Stream(IntEnum):
    """Purpose tags for the per-epoch random streams."""

    LABELED_ORDER = 0
    LABELED_AUGMENT = 1
    UNLABELED_ORDER = 2
    WEAK = 3
    STRONG = 4


def epoch_rng(seed: int, epoch: int, purpose: Stream) -> np.random.Generator:
    return np.random.default_rng([seed, epoch, int(purpose)])


@dataclass
class TrainState:
    student: PoseNet
    teacher: TeacherState
    optimizer: AdamState
    epoch: int = 0  # completed epochs
    global_step: int = 0


def init_train_state(model_cfg: PoseNetConfig, cfg: TrainConfig) -> TrainState:
    student = PoseNet(model_cfg)
    teacher = init_from_student(student, cfg.teacher_mode, cfg.decay, cfg.average_std)
    return TrainState(student, teacher, AdamState(lr=cfg.lr))


def steps_per_epoch(split: DatasetSplit, cfg: TrainConfig, mix: MixSpec) -> int:
    n_labeled, n_unlabeled, _ = split.counts()
    if n_unlabeled:
        return -(-n_unlabeled // (cfg.batch_groups * mix.n_group))
    return max(1, -(-n_labeled // cfg.labeled_batch))


def labeled_batch(
    samples: list[PoseSample],
    cfg: TrainConfig,
    rng: np.random.Generator,
    skeleton: SkeletonSpec,
    sigma: float,
) -> LabeledBatch:
    if cfg.affine:
        samples = [
            affine_weak_augment(s, rng, cfg.max_shift, cfg.max_scale, cfg.flip_prob, skeleton, sigma)
            for s in samples
        ]
    return LabeledBatch(
        images=FeatureBatch(np.stack([s.image for s in samples])[:, None]),
        heatmaps=FeatureBatch(np.stack([s.heatmaps for s in samples])),
        visibility=np.stack([s.visibility for s in samples]),
    )


def unlabeled_batch(
    samples: list[UnlabeledSample], cfg: TrainConfig, rng: np.random.Generator
) -> UnlabeledBatch:
    images = []
    for s in samples:
        if cfg.affine:
            params = draw_affine(rng, cfg.max_shift, cfg.max_scale, cfg.flip_prob)
            images.append(affine_image(s.image, params))
        else:
            images.append(s.image.copy())
    return UnlabeledBatch(weak=FeatureBatch(np.stack(images)[:, None]))


def dump_non_finite(
    dump_dir: Path | None,
    sup: LabeledBatch,
    unsup: UnlabeledBatch | None,
    lr: float,
    epoch: int,
    step: int,
) -> str | None:
    if dump_dir is None:
        return None
    dump_dir.mkdir(parents=True, exist_ok=True)
    path = dump_dir / "nan_dump.npz"
    arrays = {
        "labeled_images": sup.images.data,
        "lr": np.array(lr),
        "epoch": np.array(epoch),
        "step": np.array(step),
    }
    if unsup is not None:
        arrays["unlabeled_images"] = unsup.weak.data
    np.savez(path, **arrays)
    return str(path)


def train_epoch(
    state: TrainState,
    split: DatasetSplit,
    cfg: TrainConfig,
    mix: MixSpec,
    skeleton: SkeletonSpec | None = None,
    sigma: float = 2.0,
    dump_dir: Path | None = None,
) -> MetricsRow:
    """Run epoch ``state.epoch``, advance the counters and evaluate on val.

    Raises:
        NumericError: a loss became NaN or infinite; the offending batch is
            written to ``dump_dir/nan_dump.npz`` when ``dump_dir`` is given
    """
    skeleton = skeleton or SkeletonSpec()
    epoch = state.epoch
    lr = cfg.lr_at(epoch)
    state.optimizer.lr = lr

    labeled = split.labeled
    unlabeled = split.unlabeled
    if not labeled:
        raise ValueError("training needs at least one labeled sample")
    lab_order = epoch_rng(cfg.seed, epoch, Stream.LABELED_ORDER).permutation(len(labeled))
    lab_aug_rng = epoch_rng(cfg.seed, epoch, Stream.LABELED_AUGMENT)
    unl_order = epoch_rng(cfg.seed, epoch, Stream.UNLABELED_ORDER).permutation(len(unlabeled))
    weak_rng = epoch_rng(cfg.seed, epoch, Stream.WEAK)
    strong_rng = epoch_rng(cfg.seed, epoch, Stream.STRONG)

    n_steps = steps_per_epoch(split, cfg, mix)
    unl_size = cfg.batch_groups * mix.n_group
    totals = np.zeros(3)
    for step in range(n_steps):
        idx = lab_order[(step * cfg.labeled_batch + np.arange(cfg.labeled_batch)) % len(labeled)]
        sup = labeled_batch([labeled[i] for i in idx], cfg, lab_aug_rng, skeleton, sigma)
        unsup = None
        if unlabeled and cfg.augment.uses_unlabeled:
            uidx = unl_order[(step * unl_size + np.arange(unl_size)) % len(unlabeled)]
            unsup = unlabeled_batch([unlabeled[i] for i in uidx], cfg, weak_rng)

        result = total_loss(sup, unsup, state.student, state.teacher, cfg, mix, strong_rng)
        losses_finite = np.isfinite([result.total, result.supervised, result.unsupervised]).all()
        bad_grads = [k for k, g in result.grads.items() if not np.isfinite(g).all()]
        if not losses_finite or bad_grads:
            what = "loss" if not losses_finite else f"gradient ({', '.join(bad_grads)})"
            path = dump_non_finite(dump_dir, sup, unsup, lr, epoch, step)
            logger.error(f"Non-finite {what} at epoch {epoch} step {step} (lr {lr}); dump: {path}")
            raise NumericError(
                f"non-finite {what} at epoch {epoch}, step {step}, lr {lr}", dump_path=path
            )
        state.student.apply_gradients(result.grads, state.optimizer)
        update(state.teacher, state.student)
        state.global_step += 1
        totals += (result.supervised, result.unsupervised, result.total)

    means = totals / n_steps
    student_eval = evaluate(state.student, split.val)
    teacher_eval = evaluate(state.teacher.network, split.val)
    state.epoch += 1
    row = MetricsRow(
        epoch=epoch,
        loss_sup=float(means[0]),
        loss_unsup=float(means[1]),
        loss_total=float(means[2]),
        pck01=student_eval.pck01,
        pck02=student_eval.pck02,
        map=student_eval.map,
        teacher_pck01=teacher_eval.pck01,
    )
    logger.info(
        f"epoch {epoch}: lr={lr:.2e} loss={row.loss_total:.6f} "
        f"(sup {row.loss_sup:.6f}, unsup {row.loss_unsup:.6f}) "
        f"pck@0.1={row.pck01:.4f} teacher pck@0.1={row.teacher_pck01:.4f}"
    )
    return row


def teacher_gap(state: TrainState) -> dict[str, float]:
    """L2 distance between teacher and student trainables and BN buffers."""

    def gap(names: list[str], teacher: dict[str, np.ndarray], student: dict[str, np.ndarray]) -> float:
        return float(np.sqrt(sum(float(np.sum((teacher[n] - student[n]) ** 2)) for n in names)))

    t_params, s_params = state.teacher.params, state.student.parameters()
    t_buf, s_buf = state.teacher.network.buffers(), state.student.buffers()
    means = [n for n in t_buf if n.endswith("running_mean")]
    variances = [n for n in t_buf if n.endswith("running_var")]
    return {
        "param_gap": gap(list(t_params), t_params, s_params),
        "bn_mean_gap": gap(means, t_buf, s_buf),
        "bn_var_gap": gap(variances, t_buf, s_buf),
    }
