"""Training-curve figure from the per-epoch metrics table."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402
from loguru import logger  # noqa: E402
from matplotlib import pyplot as plt  # noqa: E402


def plot_training_curves(metrics: pd.DataFrame, path: str | Path, title: str = "") -> None:
    """Losses (left) and student/teacher PCK (right) per epoch, saved as PNG."""
    if metrics.empty:
        logger.warning("No metrics rows to plot; skipping curves")
        return
    sns.set_style("whitegrid")
    sns.set_palette("husl")
    fig, (ax_loss, ax_pck) = plt.subplots(1, 2, figsize=(12, 4.5))

    losses = metrics.melt(
        id_vars="epoch",
        value_vars=["loss_sup", "loss_unsup", "loss_total"],
        var_name="term",
        value_name="loss",
    )
    sns.lineplot(data=losses, x="epoch", y="loss", hue="term", marker="o", ax=ax_loss)
    ax_loss.set_title("Training loss")

    scores = metrics.melt(
        id_vars="epoch",
        value_vars=["pck01", "pck02", "teacher_pck01"],
        var_name="metric",
        value_name="score",
    )
    sns.lineplot(data=scores, x="epoch", y="score", hue="metric", marker="o", ax=ax_pck)
    ax_pck.set_ylim(0.0, 1.0)
    ax_pck.set_title("Validation PCK")

    if title:
        fig.suptitle(title)
    plt.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    plt.savefig(path, format="png", dpi=120, bbox_inches="tight")
    plt.close(fig)
    logger.debug(f"Saved training curves to {path}")
