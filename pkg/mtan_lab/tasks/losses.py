"""
Task losses and the weighted multi-task objective.
"""

import logging
from typing import Sequence

import numpy as np

from ..tensor_engine import Tensor, ops
from ..tensor_engine.tensor import ShapeError
from .models import EmptyMaskError, LabelMap, TaskSpec


logger = logging.getLogger(__name__)


def _require_kind(labels: LabelMap, kind: str) -> None:
    if labels.kind != kind:
        raise ValueError(f"expected {kind} labels, got {labels.kind}")


def _require_valid(labels: LabelMap, loss_name: str) -> int:
    count = labels.valid_count
    if count == 0:
        raise EmptyMaskError(f"{loss_name}: no valid pixel to average over")
    return count


def seg_loss(log_probs: Tensor, labels: LabelMap) -> Tensor:
    """
    Pixel-wise cross-entropy: mean of -log p(true class) over non-ignored pixels.

    Args:
        log_probs: Log-probabilities [B,C,H,W]
        labels: Segmentation labels [B,H,W]
    """
    _require_kind(labels, "segmentation")
    b, c, h, w = log_probs.shape
    if labels.values.shape != (b, h, w):
        raise ShapeError(f"seg_loss: labels {labels.values.shape} do not match prediction {log_probs.shape}")
    count = _require_valid(labels, "seg_loss")
    ids = labels.values[labels.valid]
    if ids.min() < 0 or ids.max() >= c:
        raise ValueError(f"seg_loss: class ids must lie in [0, {c}), got range [{ids.min()}, {ids.max()}]")

    one_hot = np.zeros((b, c, h, w))
    bi, hi, wi = np.nonzero(labels.valid)
    one_hot[bi, labels.values[bi, hi, wi], hi, wi] = 1.0
    picked = ops.sum_all(ops.elementwise_mul(log_probs, ops.constant(one_hot)))
    return ops.scale(picked, -1.0 / count)


def depth_loss(pred: Tensor, labels: LabelMap) -> Tensor:
    """Mean absolute depth difference (L1) over valid pixels."""
    _require_kind(labels, "depth")
    b, _, h, w = pred.shape
    if pred.shape != (b, 1, h, w) or labels.values.shape != (b, h, w):
        raise ShapeError(f"depth_loss: prediction {pred.shape} vs labels {labels.values.shape}")
    count = _require_valid(labels, "depth_loss")
    target = ops.constant(labels.values[:, None])
    mask = ops.constant(labels.valid[:, None].astype(np.float64))
    residual = ops.elementwise_mul(ops.abs_(ops.sub(pred, target)), mask)
    return ops.scale(ops.sum_all(residual), 1.0 / count)


def normal_loss(pred: Tensor, labels: LabelMap) -> Tensor:
    """Negative mean dot product between unit predicted and true normals over valid pixels."""
    _require_kind(labels, "normals")
    if pred.shape != labels.values.shape:
        raise ShapeError(f"normal_loss: prediction {pred.shape} vs labels {labels.values.shape}")
    count = _require_valid(labels, "normal_loss")
    masked_target = labels.values * labels.valid[:, None]
    dots = ops.sum_all(ops.elementwise_mul(pred, ops.constant(masked_target)))
    return ops.scale(dots, -1.0 / count)


def task_loss(spec: TaskSpec, pred: Tensor, labels: LabelMap) -> Tensor:
    """Dispatch to the loss of the task's kind."""
    if spec.kind == "segmentation":
        return seg_loss(pred, labels)
    if spec.kind == "depth":
        return depth_loss(pred, labels)
    return normal_loss(pred, labels)


def total_loss(losses: Sequence[Tensor], weights: Sequence[float]) -> Tensor:
    """
    Weighted multi-task objective: sum of lambda_i * L_i.

    Args:
        losses: Scalar task losses
        weights: Non-negative task weights, one per loss
    """
    if len(losses) != len(weights):
        raise ValueError(f"total_loss: {len(losses)} losses but {len(weights)} weights")
    if any(w < 0 for w in weights):
        raise ValueError(f"total_loss: weights must be >= 0, got {list(weights)}")
    return ops.weighted_sum(losses, weights)
