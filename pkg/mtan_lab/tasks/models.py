"""
Data models for tasks, their labels and evaluation reports.
"""

from dataclasses import dataclass
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

IGNORE_INDEX = -1

TaskKind = Literal["segmentation", "depth", "normals"]


class EmptyMaskError(ValueError):
    """Raised when a loss or metric has no valid pixel to average over."""


class TaskSpec(BaseModel):
    """Declares one dense-prediction task."""

    model_config = ConfigDict(validate_assignment=True, extra="forbid")

    kind: TaskKind
    name: str = Field(default="", description="Display name; defaults to the task kind")
    num_classes: Optional[int] = Field(
        default=None, ge=2, description="Class count, segmentation only (background included)"
    )

    @model_validator(mode="before")
    @classmethod
    def _expand_shorthand(cls, data: Any) -> Any:
        if isinstance(data, str):
            data = {"kind": data}
        if isinstance(data, dict) and not data.get("name") and "kind" in data:
            data = {**data, "name": data["kind"]}
        return data

    @model_validator(mode="after")
    def _check_kind(self) -> "TaskSpec":
        if self.kind == "segmentation" and self.num_classes is None:
            raise ValueError("segmentation tasks need num_classes >= 2")
        if self.kind != "segmentation" and self.num_classes is not None:
            raise ValueError(f"num_classes only applies to segmentation, not {self.kind}")
        return self

    @property
    def output_channels(self) -> int:
        if self.kind == "segmentation":
            assert self.num_classes is not None
            return self.num_classes
        return 1 if self.kind == "depth" else 3


@dataclass(frozen=True)
class LabelMap:
    """
    Batched ground truth for one task.

    values: segmentation [B,H,W] int class ids (IGNORE_INDEX for void),
            depth [B,H,W] float, normals [B,3,H,W] unit vectors.
    valid:  [B,H,W] boolean mask of pixels that count.
    """

    kind: TaskKind
    values: np.ndarray
    valid: np.ndarray

    @classmethod
    def segmentation(cls, ids: np.ndarray, ignore_index: int = IGNORE_INDEX) -> "LabelMap":
        ids = np.asarray(ids, dtype=np.int64)
        return cls(kind="segmentation", values=ids, valid=ids != ignore_index)

    @classmethod
    def depth(cls, depth: np.ndarray, valid: Optional[np.ndarray] = None) -> "LabelMap":
        depth = np.asarray(depth, dtype=np.float64)
        mask = np.ones(depth.shape, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
        return cls(kind="depth", values=depth, valid=mask)

    @classmethod
    def normals(cls, normals: np.ndarray, valid: Optional[np.ndarray] = None) -> "LabelMap":
        normals = np.asarray(normals, dtype=np.float64)
        shape = (normals.shape[0],) + normals.shape[2:]
        mask = np.ones(shape, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
        return cls(kind="normals", values=normals, valid=mask)

    @property
    def valid_count(self) -> int:
        return int(self.valid.sum())


class MetricReport(BaseModel):
    """Evaluation metrics; fields of tasks that were not evaluated stay None."""

    model_config = ConfigDict(validate_assignment=True)

    miou: Optional[float] = Field(default=None, ge=0.0, le=1.0, description="Mean IoU")
    pix_acc: Optional[float] = Field(default=None, ge=0.0, le=1.0, description="Pixel accuracy")
    abs_err: Optional[float] = Field(default=None, ge=0.0, description="Mean absolute depth error")
    rel_err: Optional[float] = Field(default=None, ge=0.0, description="Mean relative depth error")
    angle_mean_deg: Optional[float] = Field(default=None, ge=0.0, le=180.0)
    angle_median_deg: Optional[float] = Field(default=None, ge=0.0, le=180.0)
    within_11_25: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    within_22_5: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    within_30: Optional[float] = Field(default=None, ge=0.0, le=1.0)
