"""Upper-body skeleton definition and random pose sampling."""

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

KEYPOINT_NAMES = (
    "head",
    "neck",
    "l_shoulder",
    "r_shoulder",
    "l_elbow",
    "r_elbow",
    "l_wrist",
    "r_wrist",
)

MAX_PLACEMENT_TRIES = 50


class SkeletonSpec(BaseModel):
    """Kinematic tree rooted at keypoint 0 (head).

    Each keypoint's limb direction is its parent's direction plus
    ``angle_offsets[k]`` plus a uniform draw in ``+-angle_spreads[k]``
    (radians, image coordinates with y pointing down). The root direction is
    straight down plus a uniform tilt in ``+-angle_spreads[0]``.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    n_keypoints: int = Field(default=8, ge=1)
    parent: tuple[int, ...] = (-1, 0, 1, 1, 2, 3, 4, 5)
    flip_pairs: tuple[tuple[int, int], ...] = ((2, 3), (4, 5), (6, 7))
    limb_length_range: tuple[float, float] = (5.0, 10.0)
    thickness: float = Field(default=2.0, gt=0.0)
    angle_offsets: tuple[float, ...] = (0.0, 0.0, -np.pi / 2, np.pi / 2, np.pi / 2, -np.pi / 2, 0.0, 0.0)
    angle_spreads: tuple[float, ...] = (0.4, 0.3, 0.3, 0.3, 1.0, 1.0, 1.2, 1.2)
    # rendering intensity per keypoint; left and right differ so the sides
    # stay distinguishable
    intensities: tuple[float, ...] = (0.75, 0.75, 0.95, 0.55, 0.95, 0.55, 0.95, 0.55)
    invisible_prob: float = Field(default=0.1, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _tree_rooted_at_zero(self) -> "SkeletonSpec":
        k = self.n_keypoints
        for name in ("parent", "angle_offsets", "angle_spreads", "intensities"):
            if len(getattr(self, name)) != k:
                raise ValueError(f"{name} needs {k} entries, got {len(getattr(self, name))}")
        if self.parent[0] != -1:
            raise ValueError("keypoint 0 must be the root (parent -1)")
        for child, par in enumerate(self.parent[1:], start=1):
            # parents precede children, which also rules out cycles
            if not 0 <= par < child:
                raise ValueError(f"parent of keypoint {child} must be in [0, {child})")
        for a, b in self.flip_pairs:
            if not (0 <= a < k and 0 <= b < k) or a == b:
                raise ValueError(f"invalid flip pair ({a}, {b})")
        lo, hi = self.limb_length_range
        if not 0.0 <= lo <= hi:
            raise ValueError(f"limb_length_range must satisfy 0 <= lo <= hi, got {(lo, hi)}")
        return self

    def edges(self) -> list[tuple[int, int]]:
        """(child, parent) pairs."""
        return [(k, p) for k, p in enumerate(self.parent) if p >= 0]

    def flip_permutation(self) -> np.ndarray:
        perm = np.arange(self.n_keypoints)
        for a, b in self.flip_pairs:
            perm[a], perm[b] = b, a
        return perm


def _pose_relative_to_root(spec: SkeletonSpec, rng: np.random.Generator) -> np.ndarray:
    k = spec.n_keypoints
    offsets = np.zeros((k, 2))
    angles = np.zeros(k)
    lo, hi = spec.limb_length_range
    angles[0] = np.pi / 2 + rng.uniform(-spec.angle_spreads[0], spec.angle_spreads[0])
    for child in range(1, k):
        par = spec.parent[child]
        spread = spec.angle_spreads[child]
        angles[child] = angles[par] + spec.angle_offsets[child] + rng.uniform(-spread, spread)
        length = rng.uniform(lo, hi)
        offsets[child] = offsets[par] + length * np.array(
            [np.cos(angles[child]), np.sin(angles[child])]
        )
    return offsets


def inside(keypoints: np.ndarray, image_size: tuple[int, int]) -> np.ndarray:
    """Per keypoint: lies within [0, w-1] x [0, h-1]."""
    h, w = image_size
    x, y = keypoints[:, 0], keypoints[:, 1]
    return (x >= 0.0) & (x <= w - 1) & (y >= 0.0) & (y <= h - 1)


def sample_pose(
    spec: SkeletonSpec,
    rng: np.random.Generator,
    image_size: tuple[int, int] = (64, 48),
) -> tuple[np.ndarray, np.ndarray]:
    """Draw one figure.

    Returns:
        (keypoints, visibility): (K, 2) float64 (x, y) pixel positions and a
        (K,) bool array. About ``invisible_prob`` of the non-root keypoints are
        hidden; keypoints that end up outside the image are always hidden.
    """
    h, w = image_size
    offsets = _pose_relative_to_root(spec, rng)
    keypoints = offsets
    for _ in range(MAX_PLACEMENT_TRIES):
        root = np.array([rng.uniform(0.0, w - 1), rng.uniform(0.0, h - 1)])
        keypoints = offsets + root
        if inside(keypoints, image_size).all():
            break
    else:
        logger.debug("figure does not fit the image; hiding out-of-bounds keypoints")

    visibility = np.ones(spec.n_keypoints, dtype=bool)
    visibility[1:] = rng.random(spec.n_keypoints - 1) >= spec.invisible_prob
    visibility &= inside(keypoints, image_size)
    return keypoints, visibility
