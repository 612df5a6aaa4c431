"""
Task weighting for the multi-task objective.

This module provides equal weighting and Dynamic Weight Average, which raises
the weight of tasks whose epoch-average loss is falling more slowly.
"""

from .models import DwaState, WeightingError, WeightingScheme
from .dwa import current_weights, dwa_lambdas, dwa_signal, end_epoch, record_batch_loss

__all__ = [
    "DwaState",
    "WeightingError",
    "WeightingScheme",
    "current_weights",
    "dwa_lambdas",
    "dwa_signal",
    "end_epoch",
    "record_batch_loss",
]
