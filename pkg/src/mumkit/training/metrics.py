"""PCK and a simplified OKS-style mean AP on decoded keypoints.

The mean AP here uses one similarity constant for every keypoint and the
ground-truth bounding-box diagonal as scale, so its values are not comparable
with COCO keypoint AP.
"""

from dataclasses import asdict, dataclass

import numpy as np
from loguru import logger

from mumkit.data.render import decode_heatmaps
from mumkit.data.types import PoseSample
from mumkit.model.posenet import PoseNet
from mumkit.tensorgrid import FeatureBatch

KAPPA = 0.1
OKS_THRESHOLDS = np.linspace(0.5, 0.95, 10)
METRIC_NOTICE = (
    "map is a simplified OKS-style AP (single kappa=0.1, scale = GT bbox diagonal); "
    "not comparable with COCO AP"
)
METRICS_COLUMNS = (
    "epoch",
    "loss_sup",
    "loss_unsup",
    "loss_total",
    "pck01",
    "pck02",
    "map",
    "teacher_pck01",
)
EVAL_CHUNK = 64


@dataclass
class MetricsRow:
    epoch: int
    loss_sup: float
    loss_unsup: float
    loss_total: float
    pck01: float
    pck02: float
    map: float
    teacher_pck01: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class EvalResult:
    pck01: float
    pck02: float
    map: float


def _distances(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    return np.hypot(pred[..., 0] - gt[..., 0], pred[..., 1] - gt[..., 1])


def pck(
    pred: np.ndarray,
    gt: np.ndarray,
    visibility: np.ndarray,
    alpha: float,
    image_size: tuple[int, int],
) -> float:
    """Fraction of visible keypoints within alpha * max(h, w) of ground truth.

    Args:
        pred: (n, K, 2) predicted (x, y)
        gt: (n, K, 2) ground-truth (x, y)
        visibility: (n, K) bool; only visible keypoints count
        alpha: threshold as a fraction of the larger image side
        image_size: (h, w)

    Returns:
        PCK in [0, 1]; 0.0 when nothing is visible
    """
    vis = np.asarray(visibility, dtype=bool)
    if not vis.any():
        return 0.0
    hits = _distances(pred, gt) <= alpha * max(image_size)
    return float(hits[vis].mean())


def bbox_diagonal(gt: np.ndarray, visibility: np.ndarray) -> np.ndarray:
    """(n,) diagonal of each figure's visible-keypoint bounding box."""
    diags = np.zeros(len(gt))
    for i, (points, vis) in enumerate(zip(gt, visibility)):
        if vis.any():
            span = points[vis].max(axis=0) - points[vis].min(axis=0)
            diags[i] = float(np.hypot(*span))
    return diags


def keypoint_similarity(
    pred: np.ndarray, gt: np.ndarray, visibility: np.ndarray, kappa: float = KAPPA
) -> np.ndarray:
    """(n, K) exp(-d^2 / (2 s^2 kappa^2)); a zero-size figure scores 1 only on exact hits."""
    d2 = _distances(pred, gt) ** 2
    s = bbox_diagonal(gt, np.asarray(visibility, dtype=bool))[:, None]
    denom = 2.0 * s * s * kappa * kappa
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = np.where(denom > 0.0, np.exp(-d2 / np.where(denom > 0.0, denom, 1.0)), 0.0)
    return np.where((denom == 0.0) & (d2 == 0.0), 1.0, sim)


def mean_ap(
    pred: np.ndarray, gt: np.ndarray, visibility: np.ndarray, kappa: float = KAPPA
) -> float:
    """Detection rate of visible keypoints averaged over similarity thresholds 0.50..0.95."""
    vis = np.asarray(visibility, dtype=bool)
    if not vis.any():
        return 0.0
    sim = keypoint_similarity(pred, gt, vis, kappa)[vis]
    return float(np.mean([(sim >= t).mean() for t in OKS_THRESHOLDS]))


def predict_keypoints(network: PoseNet, images: np.ndarray) -> np.ndarray:
    """Eval-mode forward in chunks; returns (n, K, 2) decoded coordinates."""
    out = []
    for start in range(0, len(images), EVAL_CHUNK):
        batch = FeatureBatch(images[start:start + EVAL_CHUNK, None])
        heatmaps = network.forward_plain(batch, bn_mode="eval")
        out.append(decode_heatmaps(heatmaps.data, network.cfg.input_size))
    return np.concatenate(out, axis=0)


def evaluate(network: PoseNet, val: list[PoseSample]) -> EvalResult:
    """PCK@0.1, PCK@0.2 and simplified mean AP of ``network`` on ``val``."""
    if not val:
        logger.warning("evaluate called with an empty validation set")
        return EvalResult(0.0, 0.0, 0.0)
    images = np.stack([s.image for s in val])
    gt = np.stack([s.keypoints for s in val])
    vis = np.stack([s.visibility for s in val])
    pred = predict_keypoints(network, images)
    size = network.cfg.input_size
    return EvalResult(
        pck01=pck(pred, gt, vis, 0.1, size),
        pck02=pck(pred, gt, vis, 0.2, size),
        map=mean_ap(pred, gt, vis),
    )
