"""
Binary checkpoints for resumable training.

Layout (little-endian):
    b"MTANCKPT"  u32 version
    u32 length, UTF-8 JSON echo (config, step, adam_step, dwa)
    u32 tensor count
    per tensor: u32 name length, UTF-8 name, u32 rank, rank x u32 dims, f64 data
"""

import json
import logging
import shutil
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from ..config.models import TrainConfig, config_echo
from ..model.builder import MtanModel
from ..training.models import AdamState
from ..weighting.models import DwaState


logger = logging.getLogger(__name__)

MAGIC = b"MTANCKPT"
FORMAT_VERSION = 1
MAX_RANK = 8
MAX_ELEMENTS = 2**31 - 1
BACKUP_SUFFIX = ".backup"

_U32 = struct.Struct("<I")


class CheckpointError(Exception):
    """Base class for unreadable checkpoints; `code` names the failure."""

    code = "malformed"

    def __init__(self, message: str, path: Optional[Union[str, Path]] = None):
        where = f"{path}: " if path is not None else ""
        super().__init__(f"{where}{message} [{self.code}]")
        self.path = path


class BadMagicError(CheckpointError):
    code = "bad_magic"


class VersionMismatchError(CheckpointError):
    code = "version_mismatch"


class TruncatedCheckpointError(CheckpointError):
    code = "truncated"


class DimensionOverflowError(CheckpointError):
    code = "dimension_overflow"


class MalformedCheckpointError(CheckpointError):
    code = "malformed"


@dataclass
class Checkpoint:
    """Everything needed to resume a run."""

    config: Dict[str, Any]
    step: int
    params: Dict[str, np.ndarray]
    buffers: Dict[str, np.ndarray]
    adam: AdamState
    dwa: Optional[DwaState] = None
    version: int = FORMAT_VERSION
    extra: Dict[str, Any] = field(default_factory=dict)

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.config)

    def tensors(self) -> Iterator[Tuple[str, np.ndarray]]:
        """All stored tensors under their on-disk names, in file order."""
        for prefix, group in (
            ("param", self.params),
            ("buffer", self.buffers),
            ("adam_m", self.adam.m),
            ("adam_v", self.adam.v),
        ):
            for name in sorted(group):
                yield f"{prefix}/{name}", group[name]


class _Reader:
    """Cursor over checkpoint bytes that raises truncation errors instead of struct errors."""

    def __init__(self, data: bytes, path: Union[str, Path]):
        self.data = data
        self.offset = 0
        self.path = path

    @property
    def remaining(self) -> int:
        return len(self.data) - self.offset

    def take(self, count: int, what: str) -> bytes:
        if count > self.remaining:
            raise TruncatedCheckpointError(f"needed {count} bytes for {what}, {self.remaining} left", self.path)
        chunk = self.data[self.offset : self.offset + count]
        self.offset += count
        return chunk

    def u32(self, what: str) -> int:
        return int(_U32.unpack(self.take(_U32.size, what))[0])

    def text(self, what: str) -> str:
        raw = self.take(self.u32(f"{what} length"), what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedCheckpointError(f"{what} is not valid UTF-8: {e}", self.path) from e


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    echo = {
        "config": checkpoint.config,
        "step": checkpoint.step,
        "adam_step": checkpoint.adam.step,
        "dwa": checkpoint.dwa.model_dump() if checkpoint.dwa is not None else None,
        **checkpoint.extra,
    }
    parts: List[bytes] = [MAGIC, _U32.pack(checkpoint.version)]
    echo_bytes = json.dumps(echo, sort_keys=True).encode("utf-8")
    parts += [_U32.pack(len(echo_bytes)), echo_bytes]

    tensors = list(checkpoint.tensors())
    parts.append(_U32.pack(len(tensors)))
    for name, array in tensors:
        name_bytes = name.encode("utf-8")
        parts += [_U32.pack(len(name_bytes)), name_bytes, _U32.pack(array.ndim)]
        parts += [_U32.pack(dim) for dim in array.shape]
        parts.append(np.ascontiguousarray(array, dtype="<f8").tobytes())
    return b"".join(parts)


def decode_checkpoint(data: bytes, path: Union[str, Path] = "<bytes>") -> Checkpoint:
    reader = _Reader(data, path)
    magic = reader.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise BadMagicError(f"expected magic {MAGIC!r}, found {magic!r}", path)
    version = reader.u32("version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"format version {version}, this build reads {FORMAT_VERSION}", path)

    try:
        echo = json.loads(reader.text("config echo"))
    except json.JSONDecodeError as e:
        raise MalformedCheckpointError(f"config echo is not JSON: {e}", path) from e
    if not isinstance(echo, dict) or not {"config", "step", "adam_step"} <= set(echo):
        raise MalformedCheckpointError("config echo lacks config/step/adam_step", path)

    groups: Dict[str, Dict[str, np.ndarray]] = {"param": {}, "buffer": {}, "adam_m": {}, "adam_v": {}}
    for _ in range(reader.u32("tensor count")):
        name = reader.text("tensor name")
        rank = reader.u32(f"rank of {name}")
        if rank > MAX_RANK:
            raise DimensionOverflowError(f"tensor {name!r} has rank {rank} > {MAX_RANK}", path)
        dims = tuple(reader.u32(f"dims of {name}") for _ in range(rank))
        count = 1
        for dim in dims:
            count *= dim
        if count > MAX_ELEMENTS:
            raise DimensionOverflowError(f"tensor {name!r} with dims {dims} exceeds {MAX_ELEMENTS} elements", path)
        raw = reader.take(count * 8, f"data of {name}")
        prefix, _, key = name.partition("/")
        if prefix not in groups or not key:
            raise MalformedCheckpointError(f"unexpected tensor name {name!r}", path)
        groups[prefix][key] = np.frombuffer(raw, dtype="<f8").reshape(dims).astype(np.float64)

    if reader.remaining:
        raise MalformedCheckpointError(f"{reader.remaining} trailing bytes after the last tensor", path)

    dwa = echo.get("dwa")
    extra = {k: v for k, v in echo.items() if k not in ("config", "step", "adam_step", "dwa")}
    return Checkpoint(
        config=echo["config"],
        step=int(echo["step"]),
        params=groups["param"],
        buffers=groups["buffer"],
        adam=AdamState(m=groups["adam_m"], v=groups["adam_v"], step=int(echo["adam_step"])),
        dwa=DwaState(**dwa) if dwa is not None else None,
        version=version,
        extra=extra,
    )


def save_checkpoint(
    path: Union[str, Path],
    model: MtanModel,
    adam: AdamState,
    dwa: Optional[DwaState],
    step: int,
    config: TrainConfig,
) -> Path:
    """
    Write a checkpoint atomically.

    The previous checkpoint at `path`, if any, is kept as `<path>.backup`.

    Returns:
        The checkpoint path
    """
    checkpoint = Checkpoint(
        config=config_echo(config),
        step=step,
        params={name: t.values for name, t in model.named_parameters().items()},
        buffers={name: t.values for name, t in model.named_buffers().items()},
        adam=adam,
        dwa=dwa,
    )
    data = encode_checkpoint(checkpoint)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists():
        shutil.copy2(path, path.with_name(path.name + BACKUP_SUFFIX))
    temp_file = path.with_name(path.name + ".tmp")
    temp_file.write_bytes(data)
    temp_file.replace(path)

    logger.info(f"Saved checkpoint at step {step} to {path} ({len(data)} bytes)")
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Read a checkpoint.

    Raises:
        FileNotFoundError: If `path` does not exist
        CheckpointError: If the file is not a valid checkpoint
    """
    path = Path(path)
    checkpoint = decode_checkpoint(path.read_bytes(), path)
    logger.debug(f"Loaded checkpoint {path} at step {checkpoint.step}")
    return checkpoint


def restore_model(model: MtanModel, checkpoint: Checkpoint) -> None:
    """Copy stored parameters and buffers into `model`; names and shapes must match exactly."""
    for label, stored, live in (
        ("parameter", checkpoint.params, model.named_parameters()),
        ("buffer", checkpoint.buffers, model.named_buffers()),
    ):
        if set(stored) != set(live):
            missing = sorted(set(live) - set(stored))
            unexpected = sorted(set(stored) - set(live))
            raise MalformedCheckpointError(f"{label} names differ: missing {missing}, unexpected {unexpected}")
        for name, tensor in live.items():
            if stored[name].shape != tensor.shape:
                raise MalformedCheckpointError(
                    f"{label} {name!r} has shape {stored[name].shape}, model expects {tensor.shape}"
                )
            tensor.values = stored[name].copy()
