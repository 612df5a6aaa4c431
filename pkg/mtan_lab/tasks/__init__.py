"""
Task definitions, losses and metrics.

This module declares the dense-prediction tasks (segmentation, depth, surface
normals), their loss functions, the weighted multi-task objective and the
evaluation metrics reported after training.
"""

from .models import IGNORE_INDEX, EmptyMaskError, LabelMap, MetricReport, TaskSpec
from .losses import depth_loss, normal_loss, seg_loss, task_loss, total_loss
from .metrics import compute_metrics

__all__ = [
    "IGNORE_INDEX",
    "EmptyMaskError",
    "LabelMap",
    "MetricReport",
    "TaskSpec",
    "depth_loss",
    "normal_loss",
    "seg_loss",
    "task_loss",
    "total_loss",
    "compute_metrics",
]
