"""Multi-seed ablation grids over teacher, augmentation and structure settings."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import pandas as pd
from loguru import logger

from mumkit.training.experiment import run_experiment
from mumkit.utils.config import RunConfig, override

SUMMARY_FILE = "ablation_summary.csv"
FAILURES_FILE = "ablation_failures.csv"
SUMMARY_COLUMNS = ("variant", "seed_count", "pck01_mean", "pck01_sd")
DEFAULT_SEEDS = (0, 1, 2)


@dataclass(frozen=True)
class AblationCell:
    """One row of a summary table: a name plus dotted config overrides."""

    variant: str
    updates: dict[str, Any] = field(default_factory=dict)


def _cells(*pairs: tuple[str, dict[str, Any]]) -> list[AblationCell]:
    return [AblationCell(name, updates) for name, updates in pairs]


GRIDS: dict[str, list[AblationCell]] = {
    "baseline": _cells(
        ("supervised_only", {"train.augment": "supervised_only"}),
        ("pose_mum_eman", {"train.augment": "pose_mum", "train.teacher_mode": "eman"}),
    ),
    "teacher": _cells(
        ("single", {"train.teacher_mode": "single"}),
        ("ema_0.999", {"train.teacher_mode": "ema", "train.decay": 0.999}),
        ("ema_0.6", {"train.teacher_mode": "ema", "train.decay": 0.6}),
        ("eman_0.6", {"train.teacher_mode": "eman", "train.decay": 0.6}),
    ),
    "decay": _cells(
        *[(f"eman_{d}", {"train.teacher_mode": "eman", "train.decay": d}) for d in (0.999, 0.99, 0.9, 0.6, 0.5)]
    ),
    "augment": _cells(
        ("supervised_only", {"train.augment": "supervised_only"}),
        ("affine", {"train.augment": "affine"}),
        ("joint_cutout", {"train.augment": "joint_cutout"}),
        ("mum", {"train.augment": "mum"}),
        ("mum_joint_cutout", {"train.augment": "mum_joint_cutout"}),
        ("pose_mum", {"train.augment": "pose_mum"}),
        ("pose_mum_no_affine", {"train.augment": "pose_mum", "train.affine": False}),
    ),
    "structure": _cells(
        *[
            (f"ng{n}_{site}", {"mix.n_group": n, "model.unmix_site": site})
            for n in (2, 4)
            for site in ("after_layer2", "after_encoder", "after_decoder")
        ]
    ),
    "lambda": _cells(*[(f"lambda_{lam}", {"train.lambda_u": lam}) for lam in (0.5, 1.0, 2.0)]),
    "labels": _cells(
        *[
            (f"{mode}_{n}", {"train.augment": mode, "train.labeled_limit": n})
            for n in (25, 50, 100)
            for mode in ("supervised_only", "pose_mum")
        ]
    ),
}


def get_grid(name: str) -> list[AblationCell]:
    grid = GRIDS.get(name)
    if grid is None:
        logger.error(f"Unknown ablation grid {name!r}; available: {sorted(GRIDS)}")
        raise ValueError(f"unknown ablation grid {name!r}")
    return grid


def _run_cell_seed(
    cfg: RunConfig, dataset_path: str, run_dir: str
) -> float:
    metrics = run_experiment(cfg, dataset_path, run_dir, resume=True, plot=False)
    return float(metrics["pck01"].iloc[-1])


def summarize(results: pd.DataFrame) -> pd.DataFrame:
    """Per variant: successful seed count, mean and sample sd of final PCK@0.1.

    A variant with a single successful seed reports sd 0.
    """
    rows = []
    for variant, group in results.groupby("variant", sort=False):
        scores = group["pck01"]
        rows.append(
            {
                "variant": variant,
                "seed_count": int(scores.size),
                "pck01_mean": float(scores.mean()) if scores.size else float("nan"),
                "pck01_sd": float(scores.std(ddof=1)) if scores.size > 1 else 0.0,
            }
        )
    return pd.DataFrame(rows, columns=list(SUMMARY_COLUMNS))


def run_ablation(
    grid: str | list[AblationCell],
    base_cfg: RunConfig,
    dataset_path: str | Path,
    out_dir: str | Path,
    seeds: tuple[int, ...] = DEFAULT_SEEDS,
    workers: int = 1,
) -> pd.DataFrame:
    """Run every cell of ``grid`` once per seed and write the summary CSV.

    A failing cell/seed is logged and recorded in ``ablation_failures.csv``;
    the remaining runs continue. Variants that failed on every seed are kept
    in the summary with seed_count 0.
    """
    cells = get_grid(grid) if isinstance(grid, str) else grid
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f"Ablation over {len(cells)} variants x {len(seeds)} seeds into {out_dir}")

    jobs: list[tuple[str, int, RunConfig, str]] = []
    failures: list[dict[str, Any]] = []
    for cell in cells:
        for seed in seeds:
            try:
                cfg = override(base_cfg, {**cell.updates, "train.seed": seed})
            except Exception as e:
                logger.error(f"Variant {cell.variant} seed {seed} has an invalid config: {e}")
                failures.append({"variant": cell.variant, "seed": seed, "error": str(e)})
                continue
            jobs.append((cell.variant, seed, cfg, str(out_dir / cell.variant / f"seed{seed}")))

    results: list[dict[str, Any]] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                (variant, seed, pool.submit(_run_cell_seed, cfg, str(dataset_path), run_dir))
                for variant, seed, cfg, run_dir in jobs
            ]
            for variant, seed, future in futures:
                try:
                    results.append({"variant": variant, "seed": seed, "pck01": future.result()})
                except Exception as e:
                    logger.error(f"Variant {variant} seed {seed} failed: {e}")
                    failures.append({"variant": variant, "seed": seed, "error": str(e)})
    else:
        for variant, seed, cfg, run_dir in jobs:
            try:
                results.append(
                    {"variant": variant, "seed": seed, "pck01": _run_cell_seed(cfg, str(dataset_path), run_dir)}
                )
            except Exception as e:
                logger.error(f"Variant {variant} seed {seed} failed: {e}")
                failures.append({"variant": variant, "seed": seed, "error": str(e)})

    frame = pd.DataFrame(results, columns=["variant", "seed", "pck01"])
    summary = summarize(frame)
    missing = [c.variant for c in cells if c.variant not in set(summary["variant"])]
    if missing:
        empty = pd.DataFrame(
            [{"variant": v, "seed_count": 0, "pck01_mean": float("nan"), "pck01_sd": float("nan")} for v in missing],
            columns=list(SUMMARY_COLUMNS),
        )
        summary = pd.concat([summary, empty], ignore_index=True)
    order = {c.variant: i for i, c in enumerate(cells)}
    summary = summary.sort_values("variant", key=lambda s: s.map(order)).reset_index(drop=True)

    summary.to_csv(out_dir / SUMMARY_FILE, index=False)
    pd.DataFrame(failures, columns=["variant", "seed", "error"]).to_csv(out_dir / FAILURES_FILE, index=False)
    logger.info(f"Ablation summary written to {out_dir / SUMMARY_FILE} ({len(failures)} failures)")
    return summary
