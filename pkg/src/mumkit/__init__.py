"""mumkit: desk-scale Pose-MUM semi-supervised keypoint training."""

__version__ = "0.1.0"
