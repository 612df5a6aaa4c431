"""
Configuration and bookkeeping models for the multi-task network builder.
"""

from typing import List, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..tasks.models import TaskSpec

Variant = Literal["mtan", "split", "dense", "stan"]


class ModelConfigError(ValueError):
    """Raised when a model configuration cannot be built."""


def default_tasks() -> List[TaskSpec]:
    return [
        TaskSpec(kind="segmentation", num_classes=5),
        TaskSpec(kind="depth"),
        TaskSpec(kind="normals"),
    ]


class ModelConfig(BaseModel):
    """Architecture of a multi-task network."""

    model_config = ConfigDict(validate_assignment=True, extra="forbid")

    variant: Variant = Field(
        default="mtan", description="mtan/stan: attention towers; split: shared net + heads; dense: unmasked towers"
    )
    tasks: List[TaskSpec] = Field(default_factory=default_tasks, min_length=1)
    channel_widths: List[int] = Field(
        default_factory=lambda: [8, 16], description="Encoder block widths; the decoder mirrors them"
    )
    input_channels: int = Field(default=3, ge=1)
    bn_momentum: float = Field(default=0.1, gt=0.0, le=1.0)
    bn_eps: float = Field(default=1e-5, gt=0.0)

    @field_validator("channel_widths")
    @classmethod
    def _check_widths(cls, widths: List[int]) -> List[int]:
        if not widths:
            raise ValueError("channel_widths must name at least one encoder block")
        if any(w < 1 for w in widths):
            raise ValueError(f"channel widths must be >= 1, got {widths}")
        return widths

    @model_validator(mode="after")
    def _check_variant(self) -> "ModelConfig":
        if self.variant == "stan" and len(self.tasks) != 1:
            raise ValueError(f"stan is single-task, got {len(self.tasks)} tasks")
        return self

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    @property
    def encoder_depth(self) -> int:
        return len(self.channel_widths)

    @property
    def spatial_divisor(self) -> int:
        return 2**self.encoder_depth

    @property
    def output_channels(self) -> List[int]:
        return [task.output_channels for task in self.tasks]


class BlockSpec(BaseModel):
    """One conv block of the shared network."""

    model_config = ConfigDict(frozen=True)

    in_channels: int = Field(ge=1)
    out_channels: int = Field(ge=1)
    position: Literal["encoder", "decoder"]


class ParamCount(BaseModel):
    """Learnable parameter counts per group."""

    model_config = ConfigDict(validate_assignment=True)

    backbone: int = Field(ge=0)
    towers: List[int] = Field(default_factory=list)
    heads: List[int] = Field(default_factory=list)
    total: int = Field(ge=0)
