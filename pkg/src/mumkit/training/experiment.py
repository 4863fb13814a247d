"""Full training runs: dataset in, metrics, checkpoints and figures out.

Run directory layout:
    metrics.csv       one row per epoch
    teacher_gap.csv   teacher/student distance per epoch
    checkpoint.mmk    student, teacher, Adam moments and counters after the last epoch
    checkpoint.cfg    the run configuration the checkpoint belongs to
    curves.png        loss and PCK curves
    run_info.txt      version stamp, metric notice, effective configuration
    logs/             written by the CLI
"""

from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from mumkit.data.dataset import load_dataset
from mumkit.data.types import DatasetSplit
from mumkit.errors import ConfigurationError
from mumkit.model.posenet import PoseNet
from mumkit.nn.checkpoint import load_checkpoint, save_checkpoint
from mumkit.teacher import TeacherState
from mumkit.training.metrics import METRIC_NOTICE, METRICS_COLUMNS, EvalResult, evaluate
from mumkit.training.trainer import TrainState, init_train_state, teacher_gap, train_epoch
from mumkit.utils.config import RunConfig, dump_run_config, load_run_config
from mumkit.utils.plot import plot_training_curves
from mumkit.utils.version import version_stamp

METRICS_FILE = "metrics.csv"
GAP_FILE = "teacher_gap.csv"
CHECKPOINT_FILE = "checkpoint.mmk"
CHECKPOINT_CFG_FILE = "checkpoint.cfg"
CURVES_FILE = "curves.png"
RUN_INFO_FILE = "run_info.txt"
GAP_COLUMNS = ("epoch", "param_gap", "bn_mean_gap", "bn_var_gap")


def state_tensors(state: TrainState) -> dict[str, np.ndarray]:
    """Everything needed to continue a run, as flat named float64 arrays."""
    tensors: dict[str, np.ndarray] = {}
    tensors.update({f"student.{k}": v for k, v in state.student.state_dict().items()})
    tensors.update({f"teacher.{k}": v for k, v in state.teacher.network.state_dict().items()})
    tensors.update({f"adam.m.{k}": v for k, v in state.optimizer.m.items()})
    tensors.update({f"adam.v.{k}": v for k, v in state.optimizer.v.items()})
    tensors["counter.epoch"] = np.array([state.epoch], dtype=np.float64)
    tensors["counter.global_step"] = np.array([state.global_step], dtype=np.float64)
    tensors["counter.adam_step"] = np.array([state.optimizer.step], dtype=np.float64)
    tensors["counter.teacher_step"] = np.array([state.teacher.step], dtype=np.float64)
    return tensors


def restore_state(cfg: RunConfig, tensors: dict[str, np.ndarray]) -> TrainState:
    state = init_train_state(cfg.model, cfg.train)
    state.student.load_state(tensors, prefix="student.")
    state.teacher.network.load_state(tensors, prefix="teacher.")
    shapes = state.student.parameters()
    for moment, store in (("m", state.optimizer.m), ("v", state.optimizer.v)):
        for name, live in shapes.items():
            key = f"adam.{moment}.{name}"
            if key in tensors:
                store[name] = tensors[key].reshape(live.shape).copy()
    state.epoch = int(tensors["counter.epoch"][0])
    state.global_step = int(tensors["counter.global_step"][0])
    state.optimizer.step = int(tensors["counter.adam_step"][0])
    state.teacher.step = int(tensors["counter.teacher_step"][0])
    return state


def save_run_checkpoint(out_dir: Path, cfg: RunConfig, state: TrainState) -> None:
    save_checkpoint(out_dir / CHECKPOINT_FILE, state_tensors(state))
    (out_dir / CHECKPOINT_CFG_FILE).write_text(dump_run_config(cfg), encoding="utf-8")


def load_networks(ckpt_path: str | Path) -> tuple[RunConfig, PoseNet, TeacherState]:
    """Student and teacher from ``checkpoint.mmk`` and the ``.cfg`` beside it."""
    ckpt_path = Path(ckpt_path)
    cfg = load_run_config(ckpt_path.with_suffix(".cfg"))
    state = restore_state(cfg, load_checkpoint(ckpt_path))
    return cfg, state.student, state.teacher


def evaluate_checkpoint(ckpt_path: str | Path, dataset_path: str | Path) -> dict[str, EvalResult]:
    _, student, teacher = load_networks(ckpt_path)
    val = load_dataset(dataset_path).val
    results = {"student": evaluate(student, val), "teacher": evaluate(teacher.network, val)}
    for who, r in results.items():
        logger.info(f"{who}: pck@0.1={r.pck01:.4f} pck@0.2={r.pck02:.4f} map={r.map:.4f}")
    return results


def prepare_split(split: DatasetSplit, cfg: RunConfig) -> DatasetSplit:
    if split.labeled and split.labeled[0].image_size != tuple(cfg.model.input_size):
        raise ConfigurationError(
            f"dataset images are {split.labeled[0].image_size}, "
            f"model.input_size is {cfg.model.input_size}"
        )
    if cfg.train.labeled_limit:
        split = split.with_labeled_subset(cfg.train.labeled_limit)
    return split


def _resume(out_dir: Path, cfg: RunConfig) -> tuple[TrainState, list[dict], list[dict]]:
    ckpt = out_dir / CHECKPOINT_FILE
    if not ckpt.exists():
        return init_train_state(cfg.model, cfg.train), [], []
    saved_cfg = (out_dir / CHECKPOINT_CFG_FILE).read_text(encoding="utf-8")
    if saved_cfg != dump_run_config(cfg):
        raise ConfigurationError(
            f"{out_dir} holds a checkpoint of a different configuration; use a fresh directory"
        )
    state = restore_state(cfg, load_checkpoint(ckpt))
    rows: list[dict] = []
    gaps: list[dict] = []
    if (out_dir / METRICS_FILE).exists():
        rows = pd.read_csv(out_dir / METRICS_FILE, float_precision="round_trip").to_dict("records")
    if (out_dir / GAP_FILE).exists():
        gaps = pd.read_csv(out_dir / GAP_FILE, float_precision="round_trip").to_dict("records")
    rows = [r for r in rows if r["epoch"] < state.epoch]
    gaps = [g for g in gaps if g["epoch"] < state.epoch]
    logger.info(f"Resuming {out_dir} after epoch {state.epoch - 1}")
    return state, rows, gaps


def write_run_info(out_dir: Path, cfg: RunConfig) -> None:
    text = f"version: {version_stamp()}\nnote: {METRIC_NOTICE}\n\n{dump_run_config(cfg)}"
    (out_dir / RUN_INFO_FILE).write_text(text, encoding="utf-8")


def run_experiment(
    cfg: RunConfig,
    dataset_path: str | Path,
    out_dir: str | Path,
    resume: bool = True,
    max_epochs: int | None = None,
    plot: bool = True,
) -> pd.DataFrame:
    """Train for ``cfg.train.epochs`` epochs, checkpointing after each one.

    Args:
        resume: continue from ``out_dir/checkpoint.mmk`` when present
        max_epochs: stop once this many epochs are complete (for staged runs)
        plot: write ``curves.png`` at the end

    Returns:
        The metrics table, one row per completed epoch
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    split = prepare_split(load_dataset(dataset_path), cfg)
    if resume:
        state, rows, gaps = _resume(out_dir, cfg)
    else:
        state, rows, gaps = init_train_state(cfg.model, cfg.train), [], []
    write_run_info(out_dir, cfg)

    last = cfg.train.epochs if max_epochs is None else min(max_epochs, cfg.train.epochs)
    logger.info(
        f"Training {cfg.train.augment.value} / {cfg.train.teacher_mode.value} teacher "
        f"epochs {state.epoch}..{last - 1} into {out_dir}"
    )
    while state.epoch < last:
        epoch = state.epoch
        row = train_epoch(
            state,
            split,
            cfg.train,
            cfg.mix,
            cfg.data.skeleton,
            cfg.data.sigma,
            dump_dir=out_dir,
        )
        rows.append(row.as_dict())
        gaps.append({"epoch": epoch, **teacher_gap(state)})
        pd.DataFrame(rows, columns=list(METRICS_COLUMNS)).to_csv(out_dir / METRICS_FILE, index=False)
        pd.DataFrame(gaps, columns=list(GAP_COLUMNS)).to_csv(out_dir / GAP_FILE, index=False)
        save_run_checkpoint(out_dir, cfg, state)

    metrics = pd.DataFrame(rows, columns=list(METRICS_COLUMNS))
    if plot:
        plot_training_curves(metrics, out_dir / CURVES_FILE, title=cfg.train.augment.value)
    return metrics
