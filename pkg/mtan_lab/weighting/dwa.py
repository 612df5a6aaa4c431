"""
Equal weighting and Dynamic Weight Average (DWA).

DWA gives each task k the weight
    lambda_k(t) = K * exp(w_k(t-1) / T) / sum_i exp(w_i(t-1) / T)
where w_k(t-1) = L_k(t-1) / L_k(t-2) is the ratio of the task's last two
epoch-average losses. The first two epochs use w_k = 1.
"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from ..tasks.models import TaskSpec
from .models import DwaState, WeightingError, WeightingScheme


logger = logging.getLogger(__name__)

ZERO_LOSS_GUARD = 1e-12
LAMBDA_FLOOR = float(np.finfo(np.float64).tiny)


def dwa_lambdas(w: Sequence[float], temperature: float) -> List[float]:
    """
    K-scaled softmax of w / T, max-shifted so small temperatures do not overflow.

    Any temperature > 0 is accepted. When a task's exponential underflows it is
    floored at the smallest positive double, so every weight stays > 0 and the
    weights still sum to K.
    """
    if temperature <= 0:
        raise WeightingError(f"temperature must be > 0, got {temperature}")
    logits = np.asarray(w, dtype=np.float64) / temperature
    exps = np.exp(logits - logits.max()) + LAMBDA_FLOOR
    return [float(v) for v in (len(exps) * exps) / exps.sum()]


def record_batch_loss(state: DwaState, task: int, value: float) -> DwaState:
    """
    Add one batch loss to a task's running epoch sum.

    Args:
        state: Current DWA state
        task: Task index
        value: Batch loss (finite, non-negative)

    Returns:
        Updated state
    """
    if not 0 <= task < state.num_tasks:
        raise WeightingError(f"task index {task} out of range for {state.num_tasks} tasks")
    if not math.isfinite(value):
        raise WeightingError(f"task {task}: non-finite loss {value}")
    if value < 0:
        raise WeightingError(f"task {task}: DWA needs non-negative losses, got {value}")

    sums = list(state.epoch_loss_sums)
    counts = list(state.epoch_batch_counts)
    sums[task] += float(value)
    counts[task] += 1
    return state.model_copy(update={"epoch_loss_sums": sums, "epoch_batch_counts": counts})


def end_epoch(state: DwaState) -> DwaState:
    """
    Close the current epoch: store its average losses and compute the next weights.

    Returns:
        State with fresh `w`, `lambdas`, shifted history and reset counters
    """
    for task, count in enumerate(state.epoch_batch_counts):
        if count == 0:
            raise WeightingError(f"no loss recorded for task {task} in epoch {state.epoch_index + 1}")

    averages = [s / c for s, c in zip(state.epoch_loss_sums, state.epoch_batch_counts)]
    history = (list(state.avg_loss_history) + [averages])[-2:]
    completed = state.epoch_index + 1

    if len(history) < 2:
        w = [1.0] * state.num_tasks
    else:
        previous, older = history[1], history[0]
        w = [p / o if o >= ZERO_LOSS_GUARD else 1.0 for p, o in zip(previous, older)]
    lambdas = dwa_lambdas(w, state.temperature)

    logger.info(
        f"DWA epoch {completed}: averages {[round(a, 6) for a in averages]}, "
        f"w {[round(v, 4) for v in w]}, lambda {[round(v, 4) for v in lambdas]}"
    )
    return state.model_copy(
        update={
            "epoch_loss_sums": [0.0] * state.num_tasks,
            "epoch_batch_counts": [0] * state.num_tasks,
            "avg_loss_history": history,
            "w": w,
            "lambdas": lambdas,
            "epoch_index": completed,
        }
    )


def current_weights(
    scheme: WeightingScheme, state: Optional[DwaState] = None, num_tasks: Optional[int] = None
) -> List[float]:
    """
    Weights for the total objective.

    Args:
        scheme: equal or dwa
        state: DWA state, required for dwa
        num_tasks: Task count for equal weighting when no state is given

    Returns:
        One weight per task
    """
    if scheme.variant == "dwa":
        if state is None:
            raise WeightingError("dwa weighting needs a DwaState")
        return list(state.lambdas)
    count = num_tasks if num_tasks is not None else (state.num_tasks if state is not None else None)
    if count is None:
        raise WeightingError("equal weighting needs num_tasks or a state")
    return [1.0] * count


def dwa_signal(spec: TaskSpec, loss_value: float) -> float:
    """Loss value fed to DWA; normals losses live in [-1, 1] and are shifted to [0, 2]."""
    return loss_value + 1.0 if spec.kind == "normals" else loss_value
