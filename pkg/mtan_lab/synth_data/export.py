"""
Flat binary export of synthetic samples.

Layout: magic b"MTANDS1", then H, W, C as little-endian u32. Each following
record holds image f32 [3,H,W], seg i32 [H,W], depth f32 [H,W] and
normals f32 [3,H,W], all row-major little-endian.
"""

import logging
import struct
from pathlib import Path
from typing import Iterable, List, Tuple, Union

import numpy as np

from .models import Sample


logger = logging.getLogger(__name__)

MAGIC = b"MTANDS1"
_HEADER = struct.Struct("<III")


class ExportFormatError(ValueError):
    """Raised when a sample file does not follow the export layout."""


def _record_layout(height: int, width: int) -> List[Tuple[str, Tuple[int, ...], str]]:
    return [
        ("image", (3, height, width), "<f4"),
        ("seg", (height, width), "<i4"),
        ("depth", (height, width), "<f4"),
        ("normals", (3, height, width), "<f4"),
    ]


def write_samples(path: Union[str, Path], samples: Iterable[Sample], num_classes: int) -> int:
    """
    Write samples to `path`.

    Returns:
        Number of records written
    """
    samples = list(samples)
    if not samples:
        raise ValueError("nothing to export")
    height, width = samples[0].seg.shape
    layout = _record_layout(height, width)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(_HEADER.pack(height, width, num_classes))
        for sample in samples:
            for field_name, shape, dtype in layout:
                array = getattr(sample, field_name)
                if array.shape != shape:
                    raise ValueError(f"sample {sample.index}: {field_name} has shape {array.shape}, expected {shape}")
                f.write(np.ascontiguousarray(array, dtype=dtype).tobytes())

    logger.info(f"Exported {len(samples)} samples ({height}x{width}, {num_classes} classes) to {path}")
    return len(samples)


def read_samples(path: Union[str, Path]) -> Tuple[int, List[Sample]]:
    """
    Read an export back.

    Returns:
        (num_classes, samples) with arrays widened to float64/int64
    """
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ExportFormatError(f"{path}: missing {MAGIC!r} header")
    offset = len(MAGIC)
    if len(data) < offset + _HEADER.size:
        raise ExportFormatError(f"{path}: header is truncated")
    height, width, num_classes = _HEADER.unpack_from(data, offset)
    offset += _HEADER.size

    layout = _record_layout(height, width)
    record_size = sum(int(np.prod(shape)) * 4 for _, shape, _ in layout)
    body = len(data) - offset
    if body % record_size:
        raise ExportFormatError(f"{path}: {body} bytes is not a whole number of {record_size}-byte records")

    samples: List[Sample] = []
    for index in range(body // record_size):
        arrays = {}
        for field_name, shape, dtype in layout:
            count = int(np.prod(shape))
            arrays[field_name] = np.frombuffer(data, dtype=dtype, count=count, offset=offset).reshape(shape)
            offset += count * 4
        samples.append(
            Sample(
                image=arrays["image"].astype(np.float64),
                seg=arrays["seg"].astype(np.int64),
                depth=arrays["depth"].astype(np.float64),
                normals=arrays["normals"].astype(np.float64),
                index=index,
            )
        )
    return num_classes, samples
