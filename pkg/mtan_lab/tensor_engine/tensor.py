"""
Tensor values and the recording tape for reverse-mode differentiation.
"""

import logging
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np


logger = logging.getLogger(__name__)

DTYPE = np.float64

BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class ShapeError(ValueError):
    """Raised when tensor shapes violate an operation's preconditions."""


class Tensor:
    """Dense float64 array with optional gradient participation."""

    def __init__(self, values: Any, grad_enabled: bool = False, name: Optional[str] = None):
        """
        Create a tensor from array-like values.

        Args:
            values: Anything numpy can turn into an array
            grad_enabled: Whether gradients flow into this tensor
            name: Optional label used in diagnostics and checkpoints
        """
        array = np.array(values, dtype=DTYPE)
        for axis, extent in enumerate(array.shape):
            # the channel axis of a 4-D activation may be empty (concat identity)
            if extent < 1 and not (array.ndim == 4 and axis == 1):
                raise ShapeError(f"Tensor extents must be >= 1, got shape {array.shape}")
        self.values: np.ndarray = array
        self.grad_enabled = grad_enabled
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.is_leaf = True

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.values.shape)

    @property
    def size(self) -> int:
        return int(self.values.size)

    def item(self) -> float:
        """Return the value of a single-element tensor as a Python float."""
        if self.values.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.values

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, grad_enabled={self.grad_enabled}{label})"


@dataclass
class TapeEntry:
    """One recorded operation: its inputs, its output and how to pull gradients back."""

    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardRule


_active_tape: ContextVar[Optional["Tape"]] = ContextVar("mtan_active_tape", default=None)


class Tape:
    """
    Ordered record of differentiable operations.

    Entries are appended in execution order, so inputs of an entry are always
    produced by earlier entries or are leaves.
    """

    def __init__(self) -> None:
        self.entries: List[TapeEntry] = []
        self._leaves: Dict[int, Tensor] = {}
        self._token: Optional[Any] = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc_info: Any) -> None:
        if self._token is not None:
            _active_tape.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def leaves(self) -> List[Tensor]:
        """Grad-enabled leaves seen by the tape, in first-use order."""
        return list(self._leaves.values())

    def record(
        self, op: str, inputs: Sequence[Tensor], output: Tensor, backward: BackwardRule
    ) -> None:
        for tensor in inputs:
            if tensor.grad_enabled and tensor.is_leaf:
                self._leaves.setdefault(id(tensor), tensor)
        output.is_leaf = False
        self.entries.append(TapeEntry(op=op, inputs=tuple(inputs), output=output, backward=backward))


def active_tape() -> Optional[Tape]:
    """Return the tape installed by the innermost `with Tape()` block, if any."""
    return _active_tape.get()


def make_result(
    op: str, values: np.ndarray, inputs: Sequence[Tensor], backward: BackwardRule
) -> Tensor:
    """
    Wrap an op's output values and record the op when a tape is listening.

    Args:
        op: Operation name (for diagnostics)
        values: Forward result
        inputs: Tensors the result depends on
        backward: Maps the output gradient to one gradient (or None) per input

    Returns:
        Output tensor, grad-enabled when any input is
    """
    tape = active_tape()
    needs_grad = tape is not None and any(t.grad_enabled for t in inputs)
    out = Tensor.__new__(Tensor)
    out.values = values
    out.grad_enabled = needs_grad
    out.grad = None
    out.name = None
    out.is_leaf = True
    if needs_grad and tape is not None:
        tape.record(op, inputs, out, backward)
    return out


def backward(
    loss: Tensor, tape: Tape, leaves: Optional[Sequence[Tensor]] = None
) -> Dict[int, np.ndarray]:
    """
    Replay the tape in reverse and populate `.grad` on every grad-enabled leaf.

    Leaves that the loss does not depend on receive an all-zero gradient.

    Args:
        loss: Single-element tensor produced through the tape
        tape: Tape that recorded the forward pass
        leaves: Extra leaves (e.g. all model parameters) that must receive a gradient

    Returns:
        Mapping from id(tensor) to gradient for every tensor reached
    """
    if loss.size != 1:
        raise ShapeError(f"backward() needs a scalar loss, got shape {loss.shape}")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
    visited = 0
    for entry in reversed(tape.entries):
        grad_out = grads.get(id(entry.output))
        if grad_out is None:
            continue
        visited += 1
        input_grads = entry.backward(grad_out)
        for tensor, grad_in in zip(entry.inputs, input_grads):
            if grad_in is None or not tensor.grad_enabled:
                continue
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + grad_in
            else:
                grads[key] = grad_in

    targets: Dict[int, Tensor] = {id(t): t for t in tape.leaves}
    for tensor in leaves or ():
        targets.setdefault(id(tensor), tensor)
    for key, tensor in targets.items():
        grad = grads.get(key)
        tensor.grad = grad.copy() if grad is not None else np.zeros_like(tensor.values)

    logger.debug(f"Backward replayed {visited}/{len(tape.entries)} tape entries")
    return grads
