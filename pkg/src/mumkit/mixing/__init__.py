"""Tile mixing masks for MUM and Pose-MUM."""

from mumkit.mixing.masks import (
    compose,
    generate_mask,
    invert,
    mask_from_text,
    mask_to_text,
    mix,
    mix_backward,
    unmix,
    unmix_backward,
)
from mumkit.mixing.types import MaskStack, MixingMask, MixSpec

__all__ = [
    "MixSpec",
    "MixingMask",
    "MaskStack",
    "generate_mask",
    "invert",
    "mix",
    "unmix",
    "mix_backward",
    "unmix_backward",
    "compose",
    "mask_to_text",
    "mask_from_text",
]
