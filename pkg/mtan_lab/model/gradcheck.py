"""
End-to-end gradient check of a small multi-task network.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..tasks.losses import task_loss, total_loss
from ..tasks.models import LabelMap, TaskSpec
from ..tensor_engine import Tensor
from ..tensor_engine.gradcheck import GradcheckResult, check_gradients
from .builder import build_model, model_forward
from .models import ModelConfig


logger = logging.getLogger(__name__)

MODEL_TOLERANCE = 1e-4
COORDINATES_PER_INSTANCE = 48


def toy_config(tasks: Optional[Sequence[TaskSpec]] = None, variant: str = "mtan") -> ModelConfig:
    """Two encoder blocks of widths 2 and 4: small enough for per-parameter finite differences."""
    if tasks is None:
        tasks = [TaskSpec(kind="segmentation", num_classes=3), TaskSpec(kind="normals")]
    return ModelConfig(variant=variant, tasks=list(tasks), channel_widths=[2, 4])


def random_labels(
    specs: Sequence[TaskSpec], batch: int, height: int, width: int, rng: np.random.Generator
) -> List[LabelMap]:
    """Random, fully valid ground truth for each task."""
    labels: List[LabelMap] = []
    for spec in specs:
        if spec.kind == "segmentation":
            labels.append(LabelMap.segmentation(rng.integers(0, spec.output_channels, (batch, height, width))))
        elif spec.kind == "depth":
            labels.append(LabelMap.depth(rng.uniform(1.0, 3.0, (batch, height, width))))
        else:
            normals = rng.standard_normal((batch, 3, height, width))
            labels.append(LabelMap.normals(normals / np.linalg.norm(normals, axis=1, keepdims=True)))
    return labels


def sample_coordinates(
    tensors: Sequence[Tensor], count: int, rng: np.random.Generator
) -> List[Tuple[int, int]]:
    """
    Draw `count` (tensor position, flat index) pairs.

    Tensors are picked uniformly, then a coordinate within the picked tensor,
    so biases and BN scales are checked as often as convolution kernels.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    picks = rng.integers(0, len(tensors), size=count)
    return sorted({(int(p), int(rng.integers(0, tensors[p].values.size))) for p in picks})


def check_model_gradients(
    config: Optional[ModelConfig] = None,
    seed: int = 0,
    batch: int = 2,
    size: int = 8,
    coordinates: Optional[int] = COORDINATES_PER_INSTANCE,
) -> float:
    """
    Relative error between tape and finite-difference gradients of the model parameters.

    The loss is the equally weighted sum of all task losses on random data.
    `coordinates` parameter coordinates are sampled per call; None checks all of them.
    """
    config = config or toy_config()
    rng = np.random.default_rng(seed)
    model = build_model(config, seed=seed)
    x = Tensor(rng.standard_normal((batch, config.input_channels, size, size)))
    labels = random_labels(config.tasks, batch, size, size, rng)
    params = model.parameters()
    picked = None if coordinates is None else sample_coordinates(params, coordinates, rng)

    def loss_fn() -> Tensor:
        preds = model_forward(model, x)
        losses = [task_loss(spec, pred, label) for spec, pred, label in zip(config.tasks, preds, labels)]
        return total_loss(losses, [1.0] * len(losses))

    return check_gradients(loss_fn, params, coordinates=picked)


def check_model(
    instances: int = 20,
    seed: int = 0,
    config: Optional[ModelConfig] = None,
    coordinates: Optional[int] = COORDINATES_PER_INSTANCE,
    size: int = 8,
) -> GradcheckResult:
    """Repeat the model gradient check over `instances` seeds on `size` x `size` inputs."""
    if instances < 1:
        raise ValueError(f"instances must be >= 1, got {instances}")
    worst = max(
        check_model_gradients(config, seed=seed + i, size=size, coordinates=coordinates) for i in range(instances)
    )
    logger.debug(f"gradcheck model: max relative error {worst:.3e}")
    return GradcheckResult(name="model", instances=instances, max_error=worst, tolerance=MODEL_TOLERANCE)
