"""Data types for synthetic pose samples and dataset splits."""

from dataclasses import dataclass, field, replace

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from mumkit.data.skeleton import SkeletonSpec
from mumkit.tensorgrid import FeatureBatch


class DataConfig(BaseModel):
    """Synthetic dataset generation settings. Sizes are (h, w)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    n_labeled: int = Field(default=100, ge=0)
    n_unlabeled: int = Field(default=1900, ge=0)
    n_val: int = Field(default=500, ge=0)
    image_size: tuple[int, int] = (64, 48)
    heatmap_size: tuple[int, int] = (16, 12)
    sigma: float = Field(default=2.0, gt=0.0)
    seed: int = 0
    skeleton: SkeletonSpec = SkeletonSpec()
    # background distractors: loose limbs with joint-like blobs at both ends
    clutter_limbs: int = Field(default=3, ge=0)
    clutter_length_range: tuple[float, float] = (5.0, 10.0)
    clutter_intensity_range: tuple[float, float] = (0.4, 0.9)
    # the whole figure is dimmed by a factor drawn from this range
    contrast_range: tuple[float, float] = (0.6, 1.0)
    noise_std: float = Field(default=0.08, ge=0.0)

    @model_validator(mode="after")
    def _ranges_ordered(self) -> "DataConfig":
        for name in ("clutter_length_range", "clutter_intensity_range", "contrast_range"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo <= hi:
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi, got {(lo, hi)}")
        if self.clutter_intensity_range[1] > 1.0 or self.contrast_range[1] > 1.0:
            raise ValueError("intensity and contrast ranges must stay within [0, 1]")
        return self


@dataclass
class PoseSample:
    """One labeled figure: grayscale image, keypoints (x, y), visibility, heatmaps."""

    sample_id: int
    image: np.ndarray  # (h, w) in [0, 1]
    keypoints: np.ndarray  # (K, 2)
    visibility: np.ndarray  # (K,) bool
    heatmaps: np.ndarray  # (K, h', w')

    @property
    def image_size(self) -> tuple[int, int]:
        h, w = self.image.shape
        return h, w

    @property
    def heatmap_size(self) -> tuple[int, int]:
        _, oh, ow = self.heatmaps.shape
        return oh, ow

    def image_batch(self) -> FeatureBatch:
        return FeatureBatch(self.image[None, None])

    def copy(self) -> "PoseSample":
        return replace(
            self,
            image=self.image.copy(),
            keypoints=self.keypoints.copy(),
            visibility=self.visibility.copy(),
            heatmaps=self.heatmaps.copy(),
        )


@dataclass(frozen=True)
class UnlabeledSample:
    """What the trainer sees of an unlabeled sample: an id and an image only."""

    sample_id: int
    image: np.ndarray


@dataclass
class DatasetSplit:
    """Labeled, unlabeled and validation partitions.

    Unlabeled ground truth is kept for persistence and offline analysis, but
    ``unlabeled`` only hands out label-free views.
    """

    labeled: list[PoseSample] = field(default_factory=list)
    val: list[PoseSample] = field(default_factory=list)
    _unlabeled: list[PoseSample] = field(default_factory=list, repr=False)

    @classmethod
    def create(
        cls,
        labeled: list[PoseSample],
        unlabeled: list[PoseSample],
        val: list[PoseSample],
    ) -> "DatasetSplit":
        ids = [s.sample_id for s in (*labeled, *unlabeled, *val)]
        if len(ids) != len(set(ids)):
            raise ValueError("sample ids must be unique across partitions")
        return cls(labeled=list(labeled), val=list(val), _unlabeled=list(unlabeled))

    @property
    def unlabeled(self) -> list[UnlabeledSample]:
        return [UnlabeledSample(s.sample_id, s.image) for s in self._unlabeled]

    def unlabeled_with_labels(self) -> list[PoseSample]:
        """Ground truth of the unlabeled partition, for persistence and analysis only."""
        return list(self._unlabeled)

    def counts(self) -> tuple[int, int, int]:
        return len(self.labeled), len(self._unlabeled), len(self.val)

    def with_labeled_subset(self, n_labeled: int) -> "DatasetSplit":
        """Keep the first ``n_labeled`` labeled samples (label-budget sweeps)."""
        return DatasetSplit(
            labeled=self.labeled[:n_labeled], val=self.val, _unlabeled=self._unlabeled
        )
