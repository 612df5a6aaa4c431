"""
Data models and errors for the training loop.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..tasks.models import MetricReport


class TrainingError(RuntimeError):
    """Base class for failures that abort a training run."""


class NonFiniteGradientError(TrainingError):
    """Raised when a parameter receives a NaN or infinite gradient."""

    def __init__(self, parameter: str, step: int):
        super().__init__(f"non-finite gradient for parameter {parameter!r} at optimizer step {step}")
        self.parameter = parameter
        self.step = step


class NonFiniteLossError(TrainingError):
    """Raised when the total training loss is NaN or infinite."""

    def __init__(self, step: int, losses: List[float]):
        super().__init__(f"non-finite total loss at step {step} (task losses {losses})")
        self.step = step
        self.losses = losses


@dataclass
class AdamState:
    """First and second moment estimates per parameter name, plus the update counter."""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


class StepResult(BaseModel):
    """What one optimisation step produced."""

    model_config = ConfigDict(validate_assignment=True)

    step: int = Field(ge=1)
    lr: float = Field(gt=0.0)
    total_loss: float
    losses: List[float]
    lambdas: List[float]
    w: List[float]


class RunSummary(BaseModel):
    """Final outcome of a training run."""

    model_config = ConfigDict(validate_assignment=True)

    steps: int = Field(ge=0)
    report: MetricReport
    checkpoint_path: Optional[str] = None
    log_path: Optional[str] = None
