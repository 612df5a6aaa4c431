"""
Differentiable primitives over 4-D activations (batch, channels, height, width).

Every op computes its forward values with numpy and, when a tape is active and
an input is grad-enabled, records a backward rule returning one gradient per input.
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import ShapeError, Tensor, make_result


logger = logging.getLogger(__name__)

NORM_FLOOR = 1e-12


def constant(values: np.ndarray) -> Tensor:
    """Wrap an array as a tensor that never receives gradients."""
    return Tensor(values, grad_enabled=False)


def _require_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _require_4d(op: str, x: Tensor) -> Tuple[int, int, int, int]:
    if x.values.ndim != 4:
        raise ShapeError(f"{op}: expected a 4-D tensor [B,C,H,W], got shape {x.shape}")
    b, c, h, w = x.shape
    return b, c, h, w


def _grad_if(tensor: Tensor, grad: np.ndarray) -> Optional[np.ndarray]:
    return grad if tensor.grad_enabled else None


# ---------------------------------------------------------------------------
# Elementwise arithmetic and reductions
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("add", a, b)
    return make_result("add", a.values + b.values, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("sub", a, b)
    return make_result("sub", a.values - b.values, (a, b), lambda g: (g, -g))


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; the gradient flows to both operands."""
    _require_same_shape("elementwise_mul", a, b)
    av, bv = a.values, b.values
    return make_result(
        "elementwise_mul", av * bv, (a, b), lambda g: (_grad_if(a, g * bv), _grad_if(b, g * av))
    )


def scale(x: Tensor, factor: float) -> Tensor:
    return make_result("scale", x.values * factor, (x,), lambda g: (g * factor,))


def abs_(x: Tensor) -> Tensor:
    xv = x.values
    return make_result("abs", np.abs(xv), (x,), lambda g: (g * np.sign(xv),))


def sum_all(x: Tensor) -> Tensor:
    """Sum of every element as a 0-d tensor."""
    shape = x.shape
    return make_result(
        "sum_all", np.array(x.values.sum()), (x,), lambda g: (np.full(shape, float(g)),)
    )


def weighted_sum(terms: Sequence[Tensor], weights: Sequence[float]) -> Tensor:
    """Sum of `weight * term` over scalar tensors."""
    if len(terms) != len(weights):
        raise ShapeError(f"weighted_sum: {len(terms)} terms but {len(weights)} weights")
    if not terms:
        raise ShapeError("weighted_sum: nothing to sum")
    for term in terms:
        if term.size != 1:
            raise ShapeError(f"weighted_sum: terms must be scalars, got shape {term.shape}")
    coeffs = [float(w) for w in weights]
    total = np.array(sum(c * t.values.reshape(()) for c, t in zip(coeffs, terms)))
    return make_result(
        "weighted_sum",
        total,
        tuple(terms),
        lambda g: tuple(_grad_if(t, np.full(t.shape, c * float(g))) for c, t in zip(coeffs, terms)),
    )


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------


def relu(x: Tensor) -> Tensor:
    active = x.values > 0
    return make_result("relu", np.where(active, x.values, 0.0), (x,), lambda g: (g * active,))


def sigmoid(x: Tensor) -> Tensor:
    xv = x.values
    out = np.empty_like(xv)
    pos = xv >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-xv[pos]))
    ex = np.exp(xv[~pos])
    out[~pos] = ex / (1.0 + ex)
    return make_result("sigmoid", out, (x,), lambda g: (g * out * (1.0 - out),))


def log_softmax_channels(x: Tensor) -> Tensor:
    """Log-softmax over the channel axis of a [B,C,H,W] tensor (max-shifted)."""
    _require_4d("log_softmax_channels", x)
    shifted = x.values - x.values.max(axis=1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

    def rule(g: np.ndarray) -> Tuple[np.ndarray]:
        return (g - np.exp(out) * g.sum(axis=1, keepdims=True),)

    return make_result("log_softmax_channels", out, (x,), rule)


def l2_normalize_channels(x: Tensor) -> Tensor:
    """Scale every pixel's channel vector to unit L2 norm."""
    _require_4d("l2_normalize_channels", x)
    norm = np.maximum(np.sqrt((x.values**2).sum(axis=1, keepdims=True)), NORM_FLOOR)
    out = x.values / norm

    def rule(g: np.ndarray) -> Tuple[np.ndarray]:
        return ((g - out * (g * out).sum(axis=1, keepdims=True)) / norm,)

    return make_result("l2_normalize_channels", out, (x,), rule)


# ---------------------------------------------------------------------------
# Channel and spatial plumbing
# ---------------------------------------------------------------------------


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Stack `a`'s channels before `b`'s."""
    ba, ca, ha, wa = _require_4d("concat_channels", a)
    bb, cb, hb, wb = _require_4d("concat_channels", b)
    if (ba, ha, wa) != (bb, hb, wb):
        raise ShapeError(
            f"concat_channels: batch/spatial mismatch {a.shape} vs {b.shape}"
        )
    out = np.concatenate([a.values, b.values], axis=1)
    return make_result(
        "concat_channels",
        out,
        (a, b),
        lambda g: (_grad_if(a, g[:, :ca]), _grad_if(b, g[:, ca:])),
    )


def max_pool2(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; ties go to the first element in row-major window order."""
    b, c, h, w = _require_4d("max_pool2", x)
    if h % 2 or w % 2:
        raise ShapeError(f"max_pool2: spatial size must be even, got {h}x{w}")
    h2, w2 = h // 2, w // 2
    windows = x.values.reshape(b, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h2, w2, 4)
    argmax = windows.argmax(axis=-1)[..., None]
    out = np.take_along_axis(windows, argmax, axis=-1)[..., 0]

    def rule(g: np.ndarray) -> Tuple[np.ndarray]:
        routed = np.zeros((b, c, h2, w2, 4))
        np.put_along_axis(routed, argmax, g[..., None], axis=-1)
        return (routed.reshape(b, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h, w),)

    return make_result("max_pool2", out, (x,), rule)


def upsample_nearest2(x: Tensor) -> Tensor:
    """Nearest-neighbour 2x upsampling: each pixel becomes a 2x2 block."""
    b, c, h, w = _require_4d("upsample_nearest2", x)
    out = np.repeat(np.repeat(x.values, 2, axis=2), 2, axis=3)
    return make_result(
        "upsample_nearest2",
        out,
        (x,),
        lambda g: (g.reshape(b, c, h, 2, w, 2).sum(axis=(3, 5)),),
    )


# ---------------------------------------------------------------------------
# Convolution and normalisation
# ---------------------------------------------------------------------------


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """
    2-D cross-correlation.

    Strategy: im2col through a strided sliding-window view of the padded input
    ([B,Cin,H',W',kh,kw]) contracted against the weights with tensordot. The
    input gradient is the matching col2im, accumulated one kernel offset at a time.

    Args:
        x: Input [B,Cin,H,W]
        weight: Kernel [Cout,Cin,kh,kw] with odd kh, kw
        bias: Per-output-channel offset [Cout]
        stride: Step between windows
        padding: Zero padding on every spatial border

    Returns:
        Output [B,Cout,H',W'] with H' = (H + 2*padding - kh) // stride + 1
    """
    bsz, cin, h, w = _require_4d("conv2d", x)
    if weight.values.ndim != 4:
        raise ShapeError(f"conv2d: weight must be [Cout,Cin,kh,kw], got {weight.shape}")
    cout, wcin, kh, kw = weight.shape
    if wcin != cin:
        raise ShapeError(
            f"conv2d: input channels do not match weight: input {x.shape}, weight {weight.shape}"
        )
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"conv2d: kernel must have odd extents, got {kh}x{kw}")
    if bias.shape != (cout,):
        raise ShapeError(f"conv2d: bias must be [{cout}], got {bias.shape}")
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv2d: invalid stride={stride} or padding={padding}")

    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    if h_out < 1 or w_out < 1:
        raise ShapeError(f"conv2d: kernel {kh}x{kw} does not fit input {x.shape} with padding {padding}")

    padded = np.pad(x.values, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][
        :, :, :h_out, :w_out
    ]
    wv = weight.values
    out = np.tensordot(cols, wv, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    out = out + bias.values[None, :, None, None]

    def rule(g: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        grad_w = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3])) if weight.grad_enabled else None
        grad_b = g.sum(axis=(0, 2, 3)) if bias.grad_enabled else None
        grad_x = None
        if x.grad_enabled:
            dcols = np.tensordot(g, wv, axes=([1], [0]))  # [B,H',W',Cin,kh,kw]
            dpadded = np.zeros_like(padded)
            row_span = stride * (h_out - 1) + 1
            col_span = stride * (w_out - 1) + 1
            for i in range(kh):
                for j in range(kw):
                    dpadded[:, :, i : i + row_span : stride, j : j + col_span : stride] += dcols[
                        :, :, :, :, i, j
                    ].transpose(0, 3, 1, 2)
            grad_x = dpadded[:, :, padding : padding + h, padding : padding + w]
        return grad_x, grad_w, grad_b

    return make_result("conv2d", out, (x, weight, bias), rule)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """
    Per-channel batch normalisation.

    In training mode the batch statistics normalise the input and the running
    statistics are replaced by their exponential moving average (unbiased
    variance). In eval mode the running statistics are used.
    """
    bsz, c, h, w = _require_4d("batch_norm", x)
    if eps <= 0:
        raise ValueError(f"batch_norm: eps must be > 0, got {eps}")
    for label, param in (("gamma", gamma), ("beta", beta), ("running_mean", running_mean), ("running_var", running_var)):
        if param.shape != (c,):
            raise ShapeError(f"batch_norm: {label} must be [{c}], got {param.shape}")

    count = bsz * h * w
    if training:
        if count < 2:
            raise ValueError(
                f"batch_norm: training mode needs B*H*W >= 2 per channel, got {count} for {x.shape}"
            )
        mean = x.values.mean(axis=(0, 2, 3))
        var = x.values.var(axis=(0, 2, 3))
        running_mean.values = (1.0 - momentum) * running_mean.values + momentum * mean
        running_var.values = (1.0 - momentum) * running_var.values + momentum * var * (
            count / (count - 1)
        )
    else:
        mean = running_mean.values
        var = running_var.values

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.values - mean[None, :, None, None]) * inv_std[None, :, None, None]
    gv = gamma.values
    out = gv[None, :, None, None] * xhat + beta.values[None, :, None, None]

    def rule(g: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        grad_gamma = (g * xhat).sum(axis=(0, 2, 3)) if gamma.grad_enabled else None
        grad_beta = g.sum(axis=(0, 2, 3)) if beta.grad_enabled else None
        grad_x = None
        if x.grad_enabled:
            dxhat = g * gv[None, :, None, None]
            if training:
                sum_d = dxhat.sum(axis=(0, 2, 3), keepdims=True)
                sum_dx = (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
                grad_x = (inv_std[None, :, None, None] / count) * (
                    count * dxhat - sum_d - xhat * sum_dx
                )
            else:
                grad_x = dxhat * inv_std[None, :, None, None]
        return grad_x, grad_gamma, grad_beta, None, None

    return make_result(
        "batch_norm", out, (x, gamma, beta, running_mean, running_var), rule
    )
