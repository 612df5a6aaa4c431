"""
Data models for task weighting.
"""

from typing import Any, List, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class WeightingError(ValueError):
    """Raised when the weighting state is asked for something it cannot provide."""


class WeightingScheme(BaseModel):
    """How task losses are weighted in the total objective."""

    model_config = ConfigDict(validate_assignment=True, extra="forbid")

    variant: Literal["equal", "dwa"] = Field(default="equal", description="equal or dwa")
    t: float = Field(default=2.0, gt=0.0, description="DWA temperature")


class DwaState(BaseModel):
    """
    Dynamic Weight Average bookkeeping.

    `avg_loss_history` holds at most the last two completed-epoch averages per
    task, oldest first. `epoch_index` counts completed epochs.
    """

    model_config = ConfigDict(validate_assignment=True)

    num_tasks: int = Field(ge=1)
    temperature: float = Field(default=2.0, gt=0.0)
    epoch_loss_sums: List[float] = Field(default_factory=list)
    epoch_batch_counts: List[int] = Field(default_factory=list)
    avg_loss_history: List[List[float]] = Field(default_factory=list)
    w: List[float] = Field(default_factory=list)
    lambdas: List[float] = Field(default_factory=list)
    epoch_index: int = Field(default=0, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _fill_defaults(cls, data: Any) -> Any:
        if not isinstance(data, dict) or "num_tasks" not in data:
            return data
        k = int(data["num_tasks"])
        defaults = {"epoch_loss_sums": [0.0] * k, "epoch_batch_counts": [0] * k, "w": [1.0] * k, "lambdas": [1.0] * k}
        return {**data, **{key: value for key, value in defaults.items() if not data.get(key)}}

    @model_validator(mode="after")
    def _check_lengths(self) -> "DwaState":
        k = self.num_tasks
        for label in ("epoch_loss_sums", "epoch_batch_counts", "w", "lambdas"):
            if len(getattr(self, label)) != k:
                raise ValueError(f"{label} must have {k} entries")
        if len(self.avg_loss_history) > 2 or any(len(row) != k for row in self.avg_loss_history):
            raise ValueError(f"avg_loss_history must hold at most two rows of {k} averages")
        return self

    @classmethod
    def fresh(cls, num_tasks: int, temperature: float = 2.0) -> "DwaState":
        return cls(num_tasks=num_tasks, temperature=temperature)
