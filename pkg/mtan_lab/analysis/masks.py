"""
Attention mask inspection: 8-bit PGM dumps and summary statistics.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..model.builder import ForwardTrace
from ..tasks.models import TaskSpec


logger = logging.getLogger(__name__)

STATS_FILENAME = "mask_stats.csv"


def to_8bit(image: np.ndarray) -> np.ndarray:
    """Min-max rescale a 2-D map to 0..255; constant maps become all zeros."""
    image = np.asarray(image, dtype=np.float64)
    low, high = float(image.min()), float(image.max())
    if high - low <= 0:
        return np.zeros(image.shape, dtype=np.uint8)
    return np.rint((image - low) / (high - low) * 255.0).astype(np.uint8)


def write_pgm(path: Union[str, Path], image: np.ndarray) -> Path:
    """Write a binary (P5) greyscale image, rescaled per image."""
    if image.ndim != 2:
        raise ValueError(f"PGM images are 2-D, got shape {image.shape}")
    pixels = to_8bit(image)
    height, width = pixels.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())
    return path


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    """Read back a P5 image written by `write_pgm`."""
    data = Path(path).read_bytes()
    magic, dims, maxval, pixels = data.split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise ValueError(f"{path}: not an 8-bit P5 image")
    width, height = (int(v) for v in dims.split())
    return np.frombuffer(pixels, dtype=np.uint8, count=width * height).reshape(height, width)


def _require_masks(trace: ForwardTrace) -> None:
    if not trace.masks or not trace.masks[0]:
        raise ValueError("this model has no attention masks (only mtan and stan variants do)")


def dump_masks(
    trace: ForwardTrace,
    specs: Sequence[TaskSpec],
    out_dir: Union[str, Path],
    block: int = 0,
    channels: Optional[Sequence[int]] = None,
    sample: int = 0,
) -> List[Path]:
    """
    Write the shared features of `block`, each task's mask on them and the attended features.

    One image per (task, channel) for masks and attended features, one per
    channel for the shared features. Each image is rescaled to its own range.

    Args:
        trace: Forward trace of a batch
        specs: Task declarations, aligned with the trace
        out_dir: Output directory
        block: Backbone block whose taps are dumped
        channels: Channels to dump; all when None
        sample: Batch entry to dump

    Returns:
        Paths written
    """
    _require_masks(trace)
    if not 0 <= block < len(trace.shared):
        raise ValueError(f"block {block} out of range, model has {len(trace.shared)} blocks")
    shared = trace.shared[block].values[sample]
    selected = list(range(shared.shape[0])) if channels is None else list(channels)
    for channel in selected:
        if not 0 <= channel < shared.shape[0]:
            raise ValueError(f"channel {channel} out of range, block {block} has {shared.shape[0]} channels")

    out = Path(out_dir)
    written: List[Path] = []
    for channel in selected:
        written.append(write_pgm(out / f"shared_b{block}_c{channel}.pgm", shared[channel]))
    for task, spec in enumerate(specs):
        mask = trace.masks[task][block].values[sample]
        attended = trace.attended[task][block].values[sample]
        for channel in selected:
            stem = f"task{task}_{spec.name}_b{block}_c{channel}"
            written.append(write_pgm(out / f"{stem}_mask.pgm", mask[channel]))
            written.append(write_pgm(out / f"{stem}_attended.pgm", attended[channel]))
    logger.info(f"Wrote {len(written)} PGM images for block {block} to {out}")
    return written


def mask_statistics(trace: ForwardTrace, specs: Sequence[TaskSpec]) -> pd.DataFrame:
    """
    Per task and attention module: mean, standard deviation and contrast of mask values.

    Contrast is the spread between the 95th and 5th percentiles; masks that
    select features sharply have high contrast.
    """
    _require_masks(trace)
    rows: List[Dict[str, object]] = []
    for task, spec in enumerate(specs):
        for module, mask in enumerate(trace.masks[task]):
            values = mask.values
            p5, p95 = np.percentile(values, [5, 95])
            rows.append(
                {
                    "task": spec.name,
                    "module": module,
                    "mean": float(values.mean()),
                    "std": float(values.std()),
                    "contrast": float(p95 - p5),
                }
            )
    return pd.DataFrame(rows, columns=["task", "module", "mean", "std", "contrast"])
