"""Toy heatmap network with Pose-MUM mix hook points."""

from mumkit.model.config import PoseNetConfig, UnmixSite
from mumkit.model.posenet import ForwardTrace, MixPlan, PoseNet

__all__ = ["PoseNetConfig", "UnmixSite", "PoseNet", "ForwardTrace", "MixPlan"]
