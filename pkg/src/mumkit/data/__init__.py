"""Synthetic articulated-figure keypoint data."""

from mumkit.data.augment import (
    AffineParams,
    affine_weak_augment,
    apply_affine_to_sample,
    joint_cutout,
)
from mumkit.data.dataset import generate_dataset, load_dataset, save_dataset
from mumkit.data.render import decode_heatmaps, render_heatmaps, render_image
from mumkit.data.skeleton import KEYPOINT_NAMES, SkeletonSpec, sample_pose
from mumkit.data.types import DataConfig, DatasetSplit, PoseSample, UnlabeledSample

__all__ = [
    "KEYPOINT_NAMES",
    "SkeletonSpec",
    "DataConfig",
    "PoseSample",
    "UnlabeledSample",
    "DatasetSplit",
    "sample_pose",
    "render_image",
    "render_heatmaps",
    "decode_heatmaps",
    "AffineParams",
    "affine_weak_augment",
    "apply_affine_to_sample",
    "joint_cutout",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
]
