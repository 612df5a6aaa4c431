"""
ADAM with bias-corrected moment estimates.
"""

import logging
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from ..tensor_engine import Tensor
from ..tensor_engine.tensor import ShapeError
from .models import AdamState, NonFiniteGradientError


logger = logging.getLogger(__name__)


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    betas: Tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> AdamState:
    """
    Apply one ADAM update in place.

    Args:
        params: Named parameters; their values are replaced
        grads: Gradient per parameter name
        state: Moments from the previous step
        lr: Learning rate
        betas: Decay rates of the first and second moments
        eps: Denominator floor

    Returns:
        The new optimizer state

    Raises:
        NonFiniteGradientError: Before any parameter is touched
    """
    step = state.step + 1
    for name, param in params.items():
        if name not in grads:
            raise KeyError(f"no gradient for parameter {name!r}")
        grad = grads[name]
        if grad.shape != param.shape:
            raise ShapeError(f"gradient for {name!r} has shape {grad.shape}, parameter has {param.shape}")
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradientError(name, step)

    beta1, beta2 = betas
    m: Dict[str, np.ndarray] = {}
    v: Dict[str, np.ndarray] = {}
    for name, param in params.items():
        grad = grads[name]
        m[name] = beta1 * state.m.get(name, np.zeros_like(grad)) + (1 - beta1) * grad
        v[name] = beta2 * state.v.get(name, np.zeros_like(grad)) + (1 - beta2) * grad * grad
        m_hat = m[name] / (1 - beta1**step)
        v_hat = v[name] / (1 - beta2**step)
        param.values = param.values - lr * m_hat / (np.sqrt(v_hat) + eps)
    return AdamState(m=m, v=v, step=step)


class Adam:
    """ADAM over a fixed set of named parameters."""

    def __init__(
        self,
        params: Mapping[str, Tensor],
        lr: float = 1e-3,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = dict(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = AdamState(
            m={name: np.zeros_like(p.values) for name, p in self.params.items()},
            v={name: np.zeros_like(p.values) for name, p in self.params.items()},
        )

    def step(self, grads: Mapping[str, np.ndarray], lr: Optional[float] = None) -> None:
        self.state = adam_step(self.params, grads, self.state, self.lr if lr is None else lr, self.betas, self.eps)

    def load_state(self, state: AdamState) -> None:
        """Restore moments, e.g. from a checkpoint."""
        for name, param in self.params.items():
            for label, moments in (("m", state.m), ("v", state.v)):
                if name not in moments:
                    raise KeyError(f"optimizer state has no {label} moment for {name!r}")
                if moments[name].shape != param.shape:
                    raise ShapeError(f"{label} moment for {name!r} has shape {moments[name].shape}, expected {param.shape}")
        self.state = state
