"""
Data models for the procedural scene generator.
"""

from dataclasses import dataclass, field
from typing import List, Literal, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..tasks.models import LabelMap, TaskSpec

ShapeKind = Literal["rectangle", "circle"]


class SceneConfig(BaseModel):
    """Controls the synthetic scenes; every sample is a pure function of (config, index)."""

    model_config = ConfigDict(validate_assignment=True, extra="forbid")

    image_size: Tuple[int, int] = Field(default=(32, 32), description="(H, W) in pixels")
    num_classes: int = Field(default=5, ge=2, description="Segmentation classes, class 0 is background")
    shapes_per_scene: Tuple[int, int] = Field(default=(3, 5), description="Inclusive range of foreground shapes")
    depth_range: Tuple[float, float] = Field(default=(1.0, 2.0), description="(z_min, z_max)")
    noise_std: float = Field(default=0.05, ge=0.0, description="Gaussian pixel noise")
    seed: int = Field(default=0, ge=0)
    normal_spacing: float = Field(
        default=0.025, gt=0.0, description="Pixel pitch in depth units used when deriving normals"
    )

    @field_validator("image_size")
    @classmethod
    def _check_image_size(cls, size: Tuple[int, int]) -> Tuple[int, int]:
        if size[0] < 2 or size[1] < 2:
            raise ValueError(f"image_size must be at least 2x2, got {size}")
        return size

    @field_validator("shapes_per_scene")
    @classmethod
    def _check_shape_range(cls, bounds: Tuple[int, int]) -> Tuple[int, int]:
        low, high = bounds
        if low < 0 or high < low:
            raise ValueError(f"shapes_per_scene must satisfy 0 <= min <= max, got {bounds}")
        return bounds

    @model_validator(mode="after")
    def _check_depth_range(self) -> "SceneConfig":
        z_min, z_max = self.depth_range
        if not 0 < z_min < z_max:
            raise ValueError(f"depth_range must satisfy 0 < z_min < z_max, got {self.depth_range}")
        return self

    @property
    def height(self) -> int:
        return self.image_size[0]

    @property
    def width(self) -> int:
        return self.image_size[1]


@dataclass(frozen=True)
class ShapeSpec:
    """
    One foreground shape.

    Rectangles cover rows [top, top + height) and columns [left, left + width).
    Circles cover pixels whose centres lie within `radius` of (center_row, center_col).
    Depth is `depth` at the shape centre plus a gentle per-pixel slope.
    """

    kind: ShapeKind
    class_id: int
    top: float
    left: float
    height: float
    width: float
    depth: float
    slope: Tuple[float, float] = (0.0, 0.0)
    color: Tuple[float, float, float] = (0.5, 0.5, 0.5)

    @property
    def center(self) -> Tuple[float, float]:
        return self.top + self.height / 2, self.left + self.width / 2

    @property
    def radius(self) -> float:
        return min(self.height, self.width) / 2

    def covers(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        if self.kind == "rectangle":
            return (
                (rows >= self.top)
                & (rows < self.top + self.height)
                & (cols >= self.left)
                & (cols < self.left + self.width)
            )
        cy, cx = self.center
        return (rows + 0.5 - cy) ** 2 + (cols + 0.5 - cx) ** 2 <= self.radius**2

    def depth_at(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        cy, cx = self.center
        return self.depth + self.slope[0] * (rows + 0.5 - cy) + self.slope[1] * (cols + 0.5 - cx)


@dataclass(frozen=True)
class SceneLayout:
    """Background plane z = offset + row_slope * row + col_slope * col, plus shapes in draw order."""

    offset: float
    row_slope: float
    col_slope: float
    shapes: Tuple[ShapeSpec, ...] = ()
    background_color: Tuple[float, float, float] = (0.55, 0.55, 0.55)


@dataclass
class Sample:
    """One aligned scene: image [3,H,W] in [0,1], seg ids [H,W], depth [H,W], normals [3,H,W]."""

    image: np.ndarray
    seg: np.ndarray
    depth: np.ndarray
    normals: np.ndarray
    index: int = -1


@dataclass
class Batch:
    """Stacked samples along a leading batch axis."""

    images: np.ndarray
    seg: np.ndarray
    depth: np.ndarray
    normals: np.ndarray
    indices: List[int] = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.images.shape[0])

    def labels(self, specs: Sequence[TaskSpec]) -> List[LabelMap]:
        """Ground truth for each task, in task order."""
        labels: List[LabelMap] = []
        for spec in specs:
            if spec.kind == "segmentation":
                labels.append(LabelMap.segmentation(self.seg))
            elif spec.kind == "depth":
                labels.append(LabelMap.depth(self.depth))
            else:
                labels.append(LabelMap.normals(self.normals))
        return labels
