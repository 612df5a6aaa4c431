"""
Reverse-mode automatic differentiation over dense float64 arrays.

This module provides the Tensor value type, the Tape that records operations,
the differentiable primitives used by the MTAN forward pass, and the
finite-difference oracle used to verify them.
"""

from .tensor import Tape, Tensor, ShapeError, active_tape, backward
from .ops import (
    abs_,
    add,
    batch_norm,
    concat_channels,
    constant,
    conv2d,
    elementwise_mul,
    l2_normalize_channels,
    log_softmax_channels,
    max_pool2,
    relu,
    scale,
    sigmoid,
    sub,
    sum_all,
    upsample_nearest2,
    weighted_sum,
)
from .gradcheck import GradcheckResult, check_gradients, finite_diff_gradient, relative_error

__all__ = [
    "Tape",
    "Tensor",
    "ShapeError",
    "active_tape",
    "backward",
    "abs_",
    "add",
    "batch_norm",
    "concat_channels",
    "constant",
    "conv2d",
    "elementwise_mul",
    "l2_normalize_channels",
    "log_softmax_channels",
    "max_pool2",
    "relu",
    "scale",
    "sigmoid",
    "sub",
    "sum_all",
    "upsample_nearest2",
    "weighted_sum",
    "GradcheckResult",
    "check_gradients",
    "finite_diff_gradient",
    "relative_error",
]
