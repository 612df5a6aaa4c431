"""
Training loop for multi-task networks.

This module provides the ADAM optimizer, the Trainer that runs, evaluates and
checkpoints a configuration, and the CSV run log.
"""

from .models import (
    AdamState,
    NonFiniteGradientError,
    NonFiniteLossError,
    RunSummary,
    StepResult,
    TrainingError,
)
from .optimizer import Adam, adam_step
from .run_log import RunLog, log_columns
from .trainer import Trainer, evaluate, train

__all__ = [
    "AdamState",
    "NonFiniteGradientError",
    "NonFiniteLossError",
    "RunSummary",
    "StepResult",
    "TrainingError",
    "Adam",
    "adam_step",
    "RunLog",
    "log_columns",
    "Trainer",
    "evaluate",
    "train",
]
