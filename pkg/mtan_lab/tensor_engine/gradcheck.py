"""
Finite-difference gradient oracle and the primitive gradient-check suite.
"""

import logging
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from . import ops
from .tensor import Tape, Tensor, backward


logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-5
NORM_FLOOR = 1e-12


class GradcheckResult(BaseModel):
    """Outcome of checking one primitive (or model) against finite differences."""

    model_config = ConfigDict(validate_assignment=True)

    name: str
    instances: int = Field(ge=0)
    max_error: float = Field(ge=0.0)
    tolerance: float = Field(gt=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


def _as_float(value: Any) -> float:
    if isinstance(value, Tensor):
        return value.item()
    return float(value)


def _finite_diff_at(
    f: Callable[[Tensor], Any], x: Tensor, indices: Sequence[int], eps: float
) -> np.ndarray:
    original = x.values
    base = original.copy()
    flat = base.reshape(-1)
    grad = np.zeros(len(indices))
    x.values = base
    try:
        for position, k in enumerate(indices):
            saved = flat[k]
            flat[k] = saved + eps
            f_plus = _as_float(f(x))
            flat[k] = saved - eps
            f_minus = _as_float(f(x))
            flat[k] = saved
            grad[position] = (f_plus - f_minus) / (2.0 * eps)
    finally:
        x.values = original
    return grad


def finite_diff_gradient(
    f: Callable[[Tensor], Any], x: Tensor, eps: float = DEFAULT_EPS
) -> np.ndarray:
    """
    Central-difference gradient of a scalar function with respect to `x`.

    Each coordinate k is estimated as (f(x + eps*e_k) - f(x - eps*e_k)) / (2*eps).
    `x.values` is perturbed in place and restored afterwards.

    Args:
        f: Function of `x` returning a float or a single-element tensor
        x: Point of evaluation
        eps: Step size, must be positive

    Returns:
        Array shaped like `x`
    """
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    return _finite_diff_at(f, x, range(x.values.size), eps).reshape(x.values.shape)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = NORM_FLOOR) -> float:
    """Scale-free disagreement ||a - n|| / (||a|| + ||n||); 0 when both are (near) zero."""
    analytic = np.asarray(analytic, dtype=np.float64).reshape(-1)
    numeric = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if analytic.shape != numeric.shape:
        raise ValueError(f"gradient shapes differ: {analytic.shape} vs {numeric.shape}")
    diff = float(np.linalg.norm(analytic - numeric))
    scale = float(np.linalg.norm(analytic) + np.linalg.norm(numeric))
    return diff / max(scale, floor)


def check_gradients(
    loss_fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    eps: float = DEFAULT_EPS,
    coordinates: Optional[Sequence[Tuple[int, int]]] = None,
) -> float:
    """
    Compare tape gradients of `loss_fn()` with finite differences.

    Args:
        loss_fn: Builds the scalar loss from `inputs`
        inputs: Tensors to check; those without gradients enabled are skipped
        eps: Finite-difference step
        coordinates: (input position, flat index) pairs to check; every
            coordinate of every grad-enabled input by default

    Returns:
        Relative error of the analytic gradient over all checked coordinates together
    """
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    with Tape() as tape:
        loss = loss_fn()
    backward(loss, tape, leaves=[t for t in inputs if t.grad_enabled])

    selected: Dict[int, List[int]] = {}
    if coordinates is None:
        for position, tensor in enumerate(inputs):
            selected[position] = list(range(tensor.values.size))
    else:
        for position, index in coordinates:
            selected.setdefault(position, []).append(index)

    analytic_parts: List[np.ndarray] = []
    numeric_parts: List[np.ndarray] = []
    for position, indices in selected.items():
        tensor = inputs[position]
        if not tensor.grad_enabled:
            continue
        grad = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.values)
        analytic_parts.append(grad.reshape(-1)[indices].copy())
        numeric_parts.append(_finite_diff_at(lambda _: loss_fn(), tensor, indices, eps))
    if not analytic_parts:
        return 0.0
    return relative_error(np.concatenate(analytic_parts), np.concatenate(numeric_parts))


def _projected_loss(build: Callable[[], Tensor], rng: np.random.Generator) -> Callable[[], Tensor]:
    # project the output on a fixed random direction so every output element matters
    direction = ops.constant(rng.standard_normal(build().shape))
    return lambda: ops.sum_all(ops.elementwise_mul(build(), direction))


def _leaf(rng: np.random.Generator, *shape: int) -> Tensor:
    return Tensor(rng.standard_normal(shape), grad_enabled=True)


def _away_from_zero(rng: np.random.Generator, *shape: int) -> Tensor:
    values = rng.standard_normal(shape)
    return Tensor(np.sign(values) * (0.1 + np.abs(values)), grad_enabled=True)


def _distinct(rng: np.random.Generator, *shape: int) -> Tensor:
    count = int(np.prod(shape))
    return Tensor(rng.permutation(count).reshape(shape) * 0.1, grad_enabled=True)


def _case_conv2d(rng: np.random.Generator) -> Tuple[Callable[[], Tensor], List[Tensor]]:
    x, w, b = _leaf(rng, 2, 3, 8, 8), _leaf(rng, 4, 3, 3, 3), _leaf(rng, 4)
    stride = int(rng.integers(1, 3))
    return lambda: ops.conv2d(x, w, b, stride=stride, padding=1), [x, w, b]


def _case_batch_norm(rng: np.random.Generator) -> Tuple[Callable[[], Tensor], List[Tensor]]:
    x, gamma, beta = _leaf(rng, 2, 4, 4, 4), _leaf(rng, 4), _leaf(rng, 4)
    running_mean = Tensor(np.zeros(4))
    running_var = Tensor(np.ones(4))
    return (
        lambda: ops.batch_norm(x, gamma, beta, running_mean, running_var, training=True),
        [x, gamma, beta],
    )


def _case_relu(rng: np.random.Generator) -> Tuple[Callable[[], Tensor], List[Tensor]]:
    x = _away_from_zero(rng, 2, 3, 4, 4)
    return lambda: ops.relu(x), [x]


def _case_sigmoid(rng: np.random.Generator) -> Tuple[Callable[[], Tensor], List[Tensor]]:
    x = Tensor(3.0 * rng.standard_normal((2, 3, 4, 4)), grad_enabled=True)
    return lambda: ops.sigmoid(x), [x]


def _case_log_softmax(rng: np.random.Generator) -> Tuple[Callable[[], Tensor], List[Tensor]]:
    x = _leaf(rng, 2, 5, 3, 3)
    return lambda: ops.log_softmax_channels(x), [x]


def _case_l2_normalize(rng: np.random.Generator) -> Tuple[Callable[[], Tensor], List[Tensor]]:
    x = _away_from_zero(rng, 2, 3, 3, 3)
    return lambda: ops.l2_normalize_channels(x), [x]


def _case_elementwise_mul(rng: np.random.Generator) -> Tuple[Callable[[], Tensor], List[Tensor]]:
    a, b = _leaf(rng, 2, 3, 4, 4), _leaf(rng, 2, 3, 4, 4)
    return lambda: ops.elementwise_mul(a, b), [a, b]


def _case_concat(rng: np.random.Generator) -> Tuple[Callable[[], Tensor], List[Tensor]]:
    a, b = _leaf(rng, 2, 3, 4, 4), _leaf(rng, 2, 5, 4, 4)
    return lambda: ops.concat_channels(a, b), [a, b]


def _case_max_pool(rng: np.random.Generator) -> Tuple[Callable[[], Tensor], List[Tensor]]:
    x = _distinct(rng, 1, 2, 6, 6)
    return lambda: ops.max_pool2(x), [x]


def _case_upsample(rng: np.random.Generator) -> Tuple[Callable[[], Tensor], List[Tensor]]:
    x = _leaf(rng, 1, 2, 3, 3)
    return lambda: ops.upsample_nearest2(x), [x]


PRIMITIVE_CASES: Dict[str, Tuple[Callable[[np.random.Generator], Tuple[Callable[[], Tensor], List[Tensor]]], float]] = {
    "conv2d": (_case_conv2d, 1e-6),
    "batch_norm": (_case_batch_norm, 1e-5),
    "relu": (_case_relu, 1e-7),
    "sigmoid": (_case_sigmoid, 1e-7),
    "log_softmax_channels": (_case_log_softmax, 1e-7),
    "l2_normalize_channels": (_case_l2_normalize, 1e-7),
    "elementwise_mul": (_case_elementwise_mul, 1e-9),
    "concat_channels": (_case_concat, 1e-9),
    "max_pool2": (_case_max_pool, 1e-9),
    "upsample_nearest2": (_case_upsample, 1e-9),
}


def check_primitive(name: str, instances: int = 20, seed: int = 0) -> GradcheckResult:
    """Run one primitive's randomized gradient check."""
    if name not in PRIMITIVE_CASES:
        raise KeyError(f"Unknown primitive '{name}'; choose from {sorted(PRIMITIVE_CASES)}")
    make_case, tolerance = PRIMITIVE_CASES[name]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        build, inputs = make_case(rng)
        worst = max(worst, check_gradients(_projected_loss(build, rng), inputs))
    logger.debug(f"gradcheck {name}: max relative error {worst:.3e} (tolerance {tolerance:.0e})")
    return GradcheckResult(name=name, instances=instances, max_error=worst, tolerance=tolerance)


def run_primitive_suite(
    names: Optional[Sequence[str]] = None, instances: int = 20, seed: int = 0
) -> List[GradcheckResult]:
    """Check every requested primitive (all of them by default)."""
    selected = list(names) if names else list(PRIMITIVE_CASES)
    return [check_primitive(name, instances=instances, seed=seed) for name in selected]
