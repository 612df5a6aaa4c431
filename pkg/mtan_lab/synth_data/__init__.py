"""
Synthetic scene data.

This module generates reproducible scenes with aligned segmentation, depth and
surface-normal ground truth, so no external dataset is needed.
"""

from .models import Batch, Sample, SceneConfig, SceneLayout, ShapeSpec
from .generator import (
    class_color,
    collate,
    depth_to_normals,
    generate_batch,
    generate_sample,
    iter_batches,
    make_split,
    render_layout,
    sample_layout,
)
from .export import ExportFormatError, read_samples, write_samples

__all__ = [
    "Batch",
    "Sample",
    "SceneConfig",
    "SceneLayout",
    "ShapeSpec",
    "class_color",
    "collate",
    "depth_to_normals",
    "generate_batch",
    "generate_sample",
    "iter_batches",
    "make_split",
    "render_layout",
    "sample_layout",
    "ExportFormatError",
    "read_samples",
    "write_samples",
]
