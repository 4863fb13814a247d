"""Synthetic dataset generation and the SPD1 file format.

SPD1 layout (all integers little-endian):
    magic ``SPD1``, u32 version (=1), u32 n_labeled, u32 n_unlabeled, u32 n_val,
    then for every sample, labeled first, then unlabeled, then val:
    u32 sample_id, u32 K, u32 h, u32 w, u32 h', u32 w',
    h*w float64 image, K*2 float64 keypoints (x, y), K u8 visibility,
    K*h'*w' float64 heatmaps.
"""

import struct
from pathlib import Path

import numpy as np
from loguru import logger

from mumkit.data.render import add_pixel_noise, render_clutter, render_heatmaps, render_image
from mumkit.data.skeleton import sample_pose
from mumkit.data.types import DataConfig, DatasetSplit, PoseSample
from mumkit.errors import CorruptDataError

MAGIC = b"SPD1"
VERSION = 1


def make_sample(sample_id: int, cfg: DataConfig) -> PoseSample:
    """Sample ``sample_id`` of the dataset; depends only on (cfg.seed, sample_id).

    The figure is dimmed by a random contrast factor and drawn over loose
    distractor limbs, then pixel noise is added. Labels describe the figure only.
    """
    rng = np.random.default_rng([cfg.seed, sample_id])
    keypoints, visibility = sample_pose(cfg.skeleton, rng, cfg.image_size)
    figure = rng.uniform(*cfg.contrast_range) * render_image(
        keypoints, cfg.skeleton, cfg.image_size, visibility
    )
    clutter = render_clutter(
        rng,
        cfg.image_size,
        cfg.clutter_limbs,
        cfg.clutter_length_range,
        cfg.clutter_intensity_range,
        cfg.skeleton.thickness,
    )
    image = add_pixel_noise(np.maximum(figure, clutter), rng, cfg.noise_std)
    heatmaps = render_heatmaps(keypoints, visibility, cfg.sigma, cfg.heatmap_size, cfg.image_size)
    return PoseSample(sample_id, image, keypoints, visibility, heatmaps)


def generate_dataset(cfg: DataConfig) -> DatasetSplit:
    """Ids run 0.. through labeled, unlabeled, then val."""
    logger.info(
        f"Generating synthetic dataset: {cfg.n_labeled} labeled, "
        f"{cfg.n_unlabeled} unlabeled, {cfg.n_val} val (seed {cfg.seed})"
    )
    ids = np.arange(cfg.n_labeled + cfg.n_unlabeled + cfg.n_val)
    samples = [make_sample(int(i), cfg) for i in ids]
    a, b = cfg.n_labeled, cfg.n_labeled + cfg.n_unlabeled
    return DatasetSplit.create(samples[:a], samples[a:b], samples[b:])


def _encode_sample(sample: PoseSample) -> bytes:
    k = len(sample.keypoints)
    h, w = sample.image_size
    oh, ow = sample.heatmap_size
    return b"".join(
        [
            struct.pack("<6I", sample.sample_id, k, h, w, oh, ow),
            np.ascontiguousarray(sample.image, dtype="<f8").tobytes(),
            np.ascontiguousarray(sample.keypoints, dtype="<f8").tobytes(),
            sample.visibility.astype(np.uint8).tobytes(),
            np.ascontiguousarray(sample.heatmaps, dtype="<f8").tobytes(),
        ]
    )


def encode_dataset(split: DatasetSplit) -> bytes:
    labeled, unlabeled, val = split.labeled, split.unlabeled_with_labels(), split.val
    parts = [MAGIC, struct.pack("<4I", VERSION, len(labeled), len(unlabeled), len(val))]
    parts += [_encode_sample(s) for s in (*labeled, *unlabeled, *val)]
    return b"".join(parts)


class _Reader:
    def __init__(self, payload: bytes, source: str) -> None:
        self.payload = payload
        self.source = source
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.payload):
            raise CorruptDataError(
                f"{self.source}: truncated dataset at byte {self.offset} "
                f"(needed {size}, have {len(self.payload) - self.offset})"
            )
        chunk = self.payload[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u32(self, count: int = 1) -> tuple[int, ...]:
        return struct.unpack(f"<{count}I", self.take(4 * count))

    def f64(self, shape: tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape))
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)


def _decode_sample(reader: _Reader) -> PoseSample:
    sample_id, k, h, w, oh, ow = reader.u32(6)
    image = reader.f64((h, w))
    keypoints = reader.f64((k, 2))
    visibility = np.frombuffer(reader.take(k), dtype=np.uint8).astype(bool)
    heatmaps = reader.f64((k, oh, ow))
    return PoseSample(sample_id, image, keypoints, visibility, heatmaps)


def decode_dataset(payload: bytes, source: str = "<bytes>") -> DatasetSplit:
    reader = _Reader(payload, source)
    magic = reader.take(4)
    if magic != MAGIC:
        raise CorruptDataError(f"{source}: bad dataset magic {magic!r}")
    version, n_lab, n_unl, n_val = reader.u32(4)
    if version != VERSION:
        raise CorruptDataError(f"{source}: unsupported dataset version {version}")
    samples = [_decode_sample(reader) for _ in range(n_lab + n_unl + n_val)]
    if reader.offset != len(payload):
        raise CorruptDataError(
            f"{source}: {len(payload) - reader.offset} trailing bytes after last sample"
        )
    return DatasetSplit.create(
        samples[:n_lab], samples[n_lab:n_lab + n_unl], samples[n_lab + n_unl:]
    )


def save_dataset(split: DatasetSplit, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_dataset(split))
    logger.info(f"Saved dataset {split.counts()} to {path}")


def load_dataset(path: str | Path) -> DatasetSplit:
    """Raises CorruptDataError for bad magic/version, truncation or trailing bytes."""
    path = Path(path)
    logger.info(f"Loading dataset from {path}")
    split = decode_dataset(path.read_bytes(), source=str(path))
    logger.info(f"Dataset loaded: labeled/unlabeled/val = {split.counts()}")
    return split
