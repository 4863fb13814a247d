"""Weak affine augmentation and the Joint Cutout baseline."""

from dataclasses import dataclass

import cv2
import numpy as np

from mumkit.data.render import render_heatmaps
from mumkit.data.skeleton import SkeletonSpec, inside
from mumkit.data.types import PoseSample


@dataclass(frozen=True)
class AffineParams:
    """Scale about the image centre, optional horizontal flip, then translate."""

    shift_x: float = 0.0
    shift_y: float = 0.0
    scale: float = 1.0
    flip: bool = False

    def is_identity(self) -> bool:
        return self.shift_x == 0.0 and self.shift_y == 0.0 and self.scale == 1.0 and not self.flip


def draw_affine(
    rng: np.random.Generator, max_shift: float, max_scale: float, flip_prob: float
) -> AffineParams:
    """Shift in +-max_shift px, scale uniform in [1/max_scale, max_scale], flip w.p. flip_prob."""
    shift_x, shift_y = rng.uniform(-max_shift, max_shift, size=2) if max_shift > 0 else (0.0, 0.0)
    scale = rng.uniform(1.0 / max_scale, max_scale) if max_scale > 1.0 else 1.0
    flip = bool(rng.random() < flip_prob) if flip_prob > 0 else False
    return AffineParams(float(shift_x), float(shift_y), float(scale), flip)


def affine_matrix(params: AffineParams, image_size: tuple[int, int]) -> np.ndarray:
    """2x3 forward map p' = s * (F(p) - c) + c + t, with F the optional flip x -> w-1-x."""
    h, w = image_size
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    s = params.scale
    fx = -1.0 if params.flip else 1.0
    # F(x) - cx = fx * (x - cx) holds for both branches
    return np.array(
        [
            [s * fx, 0.0, cx - s * fx * cx + params.shift_x],
            [0.0, s, cy - s * cy + params.shift_y],
        ]
    )


def transform_points(points: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    return points @ matrix[:, :2].T + matrix[:, 2]


def warp_image(image: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Bilinear forward warp with zero fill."""
    h, w = image.shape[-2:]
    warped = cv2.warpAffine(
        image.astype(np.float32),
        matrix.astype(np.float32),
        (w, h),
        flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=0.0,
    )
    return np.clip(warped.astype(np.float64), 0.0, 1.0)


def apply_affine_to_keypoints(
    keypoints: np.ndarray,
    visibility: np.ndarray,
    params: AffineParams,
    image_size: tuple[int, int],
    skeleton: SkeletonSpec,
) -> tuple[np.ndarray, np.ndarray]:
    """Transform coordinates; a flip also swaps left/right indices. Points leaving the image are hidden."""
    moved = transform_points(keypoints, affine_matrix(params, image_size))
    vis = visibility.copy()
    if params.flip:
        perm = skeleton.flip_permutation()
        moved, vis = moved[perm], vis[perm]
    vis &= inside(moved, image_size)
    return moved, vis


def affine_weak_augment(
    sample: PoseSample,
    rng: np.random.Generator,
    max_shift: float = 4.0,
    max_scale: float = 1.15,
    flip_prob: float = 0.0,
    skeleton: SkeletonSpec | None = None,
    sigma: float = 2.0,
) -> PoseSample:
    """One shared affine applied to image and keypoints; heatmaps are re-rendered."""
    params = draw_affine(rng, max_shift, max_scale, flip_prob)
    return apply_affine_to_sample(sample, params, skeleton or SkeletonSpec(), sigma)


def apply_affine_to_sample(
    sample: PoseSample, params: AffineParams, skeleton: SkeletonSpec, sigma: float = 2.0
) -> PoseSample:
    if params.is_identity():
        return sample.copy()
    size = sample.image_size
    matrix = affine_matrix(params, size)
    keypoints, visibility = apply_affine_to_keypoints(
        sample.keypoints, sample.visibility, params, size, skeleton
    )
    heatmaps = render_heatmaps(keypoints, visibility, sigma, sample.heatmap_size, size)
    return PoseSample(
        sample_id=sample.sample_id,
        image=warp_image(sample.image, matrix),
        keypoints=keypoints,
        visibility=visibility,
        heatmaps=heatmaps,
    )


def affine_image(image: np.ndarray, params: AffineParams) -> np.ndarray:
    """The image half of :func:`apply_affine_to_sample`, for unlabeled images."""
    if params.is_identity():
        return image.copy()
    return warp_image(image, affine_matrix(params, image.shape))


def cutout_patches(image: np.ndarray, centres: np.ndarray, patch_size: int) -> np.ndarray:
    """Zero a patch_size x patch_size square centred on every (x, y) in ``centres``."""
    out = image.copy()
    h, w = out.shape
    half = patch_size // 2
    for x, y in np.floor(np.asarray(centres, dtype=np.float64) + 0.5).astype(np.int64):
        y0, x0 = y - half, x - half
        out[max(y0, 0):min(y0 + patch_size, h), max(x0, 0):min(x0 + patch_size, w)] = 0.0
    return out


def choose_joints(
    visibility: np.ndarray, rng: np.random.Generator, n_joints: int
) -> np.ndarray:
    """Up to n_joints distinct visible keypoint indices, uniformly."""
    candidates = np.flatnonzero(visibility)
    take = min(n_joints, candidates.size)
    if take == 0:
        return np.zeros(0, dtype=np.int64)
    return rng.choice(candidates, size=take, replace=False)


def joint_cutout(
    sample: PoseSample, rng: np.random.Generator, n_joints: int = 2, patch_size: int = 9
) -> PoseSample:
    """Zero square patches centred on randomly chosen visible joints; labels untouched."""
    if n_joints > len(sample.keypoints):
        raise ValueError(f"n_joints={n_joints} exceeds K={len(sample.keypoints)}")
    out = sample.copy()
    chosen = choose_joints(sample.visibility, rng, n_joints)
    if chosen.size:
        out.image = cutout_patches(sample.image, sample.keypoints[chosen], patch_size)
    return out
