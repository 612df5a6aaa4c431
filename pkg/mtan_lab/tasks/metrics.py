"""
Evaluation metrics for segmentation, depth and surface normals.
"""

import logging
from typing import Dict, Optional, Sequence, Union

import numpy as np

from ..tensor_engine import Tensor
from .models import LabelMap, MetricReport, TaskSpec


logger = logging.getLogger(__name__)

REL_ERR_MIN_DEPTH = 1e-6
ANGLE_THRESHOLDS = (11.25, 22.5, 30.0)

Prediction = Union[Tensor, np.ndarray]


def _values(pred: Prediction) -> np.ndarray:
    return pred.values if isinstance(pred, Tensor) else np.asarray(pred, dtype=np.float64)


def confusion_matrix(pred_ids: np.ndarray, true_ids: np.ndarray, num_classes: int) -> np.ndarray:
    """Counts [true, predicted] over already-filtered pixel ids."""
    flat = true_ids.astype(np.int64) * num_classes + pred_ids.astype(np.int64)
    return np.bincount(flat, minlength=num_classes * num_classes).reshape(num_classes, num_classes)


def segmentation_metrics(pred: Prediction, labels: LabelMap, num_classes: int) -> Dict[str, Optional[float]]:
    """
    Mean IoU and pixel accuracy over non-ignored pixels.

    Classes absent from both prediction and ground truth are left out of the mean.
    """
    pred_ids = _values(pred).argmax(axis=1)
    valid = labels.valid
    if not valid.any():
        return {"miou": None, "pix_acc": None}
    confusion = confusion_matrix(pred_ids[valid], labels.values[valid], num_classes)
    intersection = np.diag(confusion).astype(np.float64)
    union = confusion.sum(axis=0) + confusion.sum(axis=1) - np.diag(confusion)
    present = union > 0
    miou = float((intersection[present] / union[present]).mean())
    pix_acc = float(intersection.sum() / confusion.sum())
    return {"miou": miou, "pix_acc": pix_acc}


def depth_metrics(pred: Prediction, labels: LabelMap) -> Dict[str, Optional[float]]:
    """Mean absolute and mean relative depth error over valid pixels."""
    values = _values(pred)[:, 0]
    valid = labels.valid
    if not valid.any():
        return {"abs_err": None, "rel_err": None}
    error = np.abs(values - labels.values)
    abs_err = float(error[valid].mean())
    rel_mask = valid & (labels.values >= REL_ERR_MIN_DEPTH)
    rel_err = float((error[rel_mask] / labels.values[rel_mask]).mean()) if rel_mask.any() else None
    return {"abs_err": abs_err, "rel_err": rel_err}


def normal_angles_deg(pred: Prediction, labels: LabelMap) -> np.ndarray:
    """Per-pixel angle in degrees between predicted and true normals, valid pixels only."""
    dots = (_values(pred) * labels.values).sum(axis=1)
    return np.degrees(np.arccos(np.clip(dots[labels.valid], -1.0, 1.0)))


def normal_metrics(pred: Prediction, labels: LabelMap) -> Dict[str, Optional[float]]:
    """Mean/median angle error and the fraction of pixels within each threshold."""
    angles = normal_angles_deg(pred, labels)
    if angles.size == 0:
        return {"angle_mean_deg": None, "angle_median_deg": None}
    metrics: Dict[str, Optional[float]] = {
        "angle_mean_deg": float(angles.mean()),
        "angle_median_deg": float(np.median(angles)),
    }
    for threshold, key in zip(ANGLE_THRESHOLDS, ("within_11_25", "within_22_5", "within_30")):
        metrics[key] = float((angles <= threshold).mean())
    return metrics


def compute_metrics(
    preds: Sequence[Prediction], labels: Sequence[LabelMap], specs: Sequence[TaskSpec]
) -> MetricReport:
    """
    Evaluate every task's predictions against its labels.

    Args:
        preds: One prediction per task (log-probs, depth or unit normals)
        labels: One label map per task, aligned with `preds`
        specs: Task declarations, aligned with `preds`

    Returns:
        MetricReport with the fields of the evaluated task kinds filled in
    """
    if not (len(preds) == len(labels) == len(specs)):
        raise ValueError(
            f"compute_metrics: {len(preds)} predictions, {len(labels)} label maps, {len(specs)} specs"
        )
    fields: Dict[str, Optional[float]] = {}
    for pred, label, spec in zip(preds, labels, specs):
        if spec.kind == "segmentation":
            fields.update(segmentation_metrics(pred, label, spec.output_channels))
        elif spec.kind == "depth":
            fields.update(depth_metrics(pred, label))
        else:
            fields.update(normal_metrics(pred, label))
    return MetricReport(**fields)
