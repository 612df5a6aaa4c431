"""
Parameter-holding layers: convolution, batch normalisation and their pairing.
"""

from typing import Dict, Literal, Optional

import numpy as np

from ..tensor_engine import Tensor, ops


class Conv2d:
    """Same-padding convolution with fan-in scaled uniform initialisation."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        zero_bias: bool = False,
    ):
        bound = 1.0 / np.sqrt(in_channels * kernel_size * kernel_size)
        self.kernel_size = kernel_size
        self.weight = Tensor(
            rng.uniform(-bound, bound, (out_channels, in_channels, kernel_size, kernel_size)),
            grad_enabled=True,
        )
        bias = np.zeros(out_channels) if zero_bias else rng.uniform(-bound, bound, out_channels)
        self.bias = Tensor(bias, grad_enabled=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, stride=1, padding=self.kernel_size // 2)

    def named_parameters(self) -> Dict[str, Tensor]:
        return {"weight": self.weight, "bias": self.bias}


class BatchNorm2d:
    """Affine batch normalisation with running statistics for eval mode."""

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(channels), grad_enabled=True)
        self.beta = Tensor(np.zeros(channels), grad_enabled=True)
        self.running_mean = Tensor(np.zeros(channels))
        self.running_var = Tensor(np.ones(channels))

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        return ops.batch_norm(
            x,
            self.gamma,
            self.beta,
            self.running_mean,
            self.running_var,
            training=training,
            momentum=self.momentum,
            eps=self.eps,
        )

    def named_parameters(self) -> Dict[str, Tensor]:
        return {"gamma": self.gamma, "beta": self.beta}

    def named_buffers(self) -> Dict[str, Tensor]:
        return {"running_mean": self.running_mean, "running_var": self.running_var}


class ConvBN:
    """Convolution, batch normalisation and an optional ReLU."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        activation: Optional[Literal["relu"]] = "relu",
        momentum: float = 0.1,
        eps: float = 1e-5,
        zero_bias: bool = False,
    ):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.conv = Conv2d(in_channels, out_channels, kernel_size, rng, zero_bias=zero_bias)
        self.bn = BatchNorm2d(out_channels, momentum=momentum, eps=eps)
        self.activation = activation

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        out = self.bn(self.conv(x), training)
        return ops.relu(out) if self.activation == "relu" else out

    def named_parameters(self) -> Dict[str, Tensor]:
        params = {f"conv.{k}": v for k, v in self.conv.named_parameters().items()}
        params.update({f"bn.{k}": v for k, v in self.bn.named_parameters().items()})
        return params

    def named_buffers(self) -> Dict[str, Tensor]:
        return {f"bn.{k}": v for k, v in self.bn.named_buffers().items()}


def prefixed(prefix: str, tensors: Dict[str, Tensor]) -> Dict[str, Tensor]:
    return {f"{prefix}.{name}": tensor for name, tensor in tensors.items()}


def count_parameters(tensors: Dict[str, Tensor]) -> int:
    return sum(t.size for t in tensors.values())
