"""
Procedural generation of aligned (image, segmentation, depth, normals) scenes.

A scene is a tilted background plane in the far half of the depth range with
rectangles and circles placed in front of it. Each shape has a class id, a
class-coloured surface and a near-constant depth in the near half of the range,
so occlusion always puts the shape in front of the background. Surfaces are
darker the further away they are, which gives depth an appearance cue.
"""

import colorsys
import logging
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from .models import Batch, Sample, SceneConfig, SceneLayout, ShapeSpec


logger = logging.getLogger(__name__)

MAX_PLACEMENT_ATTEMPTS = 100
SHADING_STRENGTH = 0.6


def class_color(class_id: int, num_classes: int) -> Tuple[float, float, float]:
    """Base colour of a class: evenly spaced hues, fully bright."""
    hue = 0.8 * (class_id - 1) / max(num_classes - 2, 1)
    r, g, b = colorsys.hsv_to_rgb(hue, 0.8, 1.0)
    return r, g, b


def _place_box(rng: np.random.Generator, height: int, width: int) -> Tuple[int, int, int, int]:
    """Draw a box that lies inside the image, resampling boxes that spill over the border."""
    low_h, high_h = max(1, height // 8), max(1, (2 * height) // 3)
    low_w, high_w = max(1, width // 8), max(1, (2 * width) // 3)
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        box_h = int(rng.integers(low_h, high_h + 1))
        box_w = int(rng.integers(low_w, high_w + 1))
        top = int(rng.integers(0, height)) - box_h // 2
        left = int(rng.integers(0, width)) - box_w // 2
        if top >= 0 and left >= 0 and top + box_h <= height and left + box_w <= width:
            return top, left, box_h, box_w
    # pathological sizes: fall back to the smallest box in the corner
    return 0, 0, low_h, low_w


def sample_layout(config: SceneConfig, rng: np.random.Generator) -> SceneLayout:
    """
    Draw the background plane and foreground shapes of one scene.

    Args:
        config: Scene configuration
        rng: Random generator owned by this scene

    Returns:
        Layout whose rendering satisfies the depth ordering
    """
    height, width = config.image_size
    z_min, z_max = config.depth_range
    mid = (z_min + z_max) / 2

    # background stays in [mid, z_max]
    quarter = (z_max - mid) / 2
    center_depth = mid + quarter
    row_span, col_span = rng.uniform(-quarter, quarter, size=2)
    row_slope = row_span / max(height - 1, 1)
    col_slope = col_span / max(width - 1, 1)
    offset = center_depth - row_slope * (height - 1) / 2 - col_slope * (width - 1) / 2
    grey = float(rng.uniform(0.5, 0.6))

    # shapes stay in (z_min, mid)
    near_span = mid - z_min
    max_slope = 0.1 * near_span / max(height, width)
    low, high = config.shapes_per_scene
    count = int(rng.integers(low, high + 1))
    shapes: List[ShapeSpec] = []
    for _ in range(count):
        kind = "rectangle" if rng.random() < 0.5 else "circle"
        class_id = int(rng.integers(1, config.num_classes))
        top, left, box_h, box_w = _place_box(rng, height, width)
        if kind == "circle":
            box_h = box_w = min(box_h, box_w)
        base = np.asarray(class_color(class_id, config.num_classes))
        color = np.clip(base + rng.uniform(-0.06, 0.06, size=3), 0.0, 1.0)
        shapes.append(
            ShapeSpec(
                kind=kind,
                class_id=class_id,
                top=float(top),
                left=float(left),
                height=float(box_h),
                width=float(box_w),
                depth=float(rng.uniform(z_min + 0.1 * near_span, mid - 0.1 * near_span)),
                slope=(float(rng.uniform(-max_slope, max_slope)), float(rng.uniform(-max_slope, max_slope))),
                color=(float(color[0]), float(color[1]), float(color[2])),
            )
        )

    return SceneLayout(
        offset=float(offset),
        row_slope=float(row_slope),
        col_slope=float(col_slope),
        shapes=tuple(shapes),
        background_color=(grey, grey, grey),
    )


def render_layout(config: SceneConfig, layout: SceneLayout) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Rasterise a layout without noise.

    Returns:
        (colour [3,H,W], seg [H,W], depth [H,W], normals [3,H,W])
    """
    height, width = config.image_size
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)

    depth = layout.offset + layout.row_slope * rows + layout.col_slope * cols
    seg = np.zeros((height, width), dtype=np.int64)
    color = np.empty((3, height, width), dtype=np.float64)
    color[:] = np.asarray(layout.background_color)[:, None, None]

    for shape in layout.shapes:
        shape_depth = shape.depth_at(rows, cols)
        visible = shape.covers(rows, cols) & (shape_depth < depth)
        depth = np.where(visible, shape_depth, depth)
        seg[visible] = shape.class_id
        color[:, visible] = np.asarray(shape.color)[:, None]

    normals = depth_to_normals(depth, spacing=config.normal_spacing)
    return color, seg, depth, normals


def shade(color: np.ndarray, depth: np.ndarray, depth_range: Tuple[float, float]) -> np.ndarray:
    """Darken colours linearly with depth."""
    z_min, z_max = depth_range
    factor = 1.0 - SHADING_STRENGTH * (depth - z_min) / (z_max - z_min)
    return color * factor[None, :, :]


def generate_sample(config: SceneConfig, index: int) -> Sample:
    """
    Generate scene `index`. The result depends only on (config, index).

    Args:
        config: Scene configuration
        index: Non-negative sample index

    Returns:
        Sample with image in [0, 1]
    """
    if index < 0:
        raise ValueError(f"sample index must be >= 0, got {index}")
    rng = np.random.default_rng([config.seed, index])
    layout = sample_layout(config, rng)
    color, seg, depth, normals = render_layout(config, layout)

    image = shade(color, depth, config.depth_range)
    if config.noise_std > 0:
        image = image + rng.normal(0.0, config.noise_std, size=image.shape)
    image = np.clip(image, 0.0, 1.0)
    return Sample(image=image, seg=seg, depth=depth, normals=normals, index=index)


def depth_to_normals(depth: np.ndarray, spacing: float = 1.0) -> np.ndarray:
    """
    Surface normals of a depth map.

    n = normalize(-dz/dx, -dz/dy, 1), with x along columns and y along rows.
    Central differences inside, one-sided differences on the border.

    Args:
        depth: [H,W] depth map, H and W >= 2
        spacing: Pixel pitch in depth units

    Returns:
        [3,H,W] unit normals
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2 or depth.shape[0] < 2 or depth.shape[1] < 2:
        raise ValueError(f"depth_to_normals needs an [H,W] map with H, W >= 2, got {depth.shape}")
    if spacing <= 0:
        raise ValueError(f"spacing must be > 0, got {spacing}")
    dz_dy, dz_dx = np.gradient(depth, spacing)
    normals = np.stack([-dz_dx, -dz_dy, np.ones_like(depth)])
    return normals / np.linalg.norm(normals, axis=0, keepdims=True)


def make_split(config: SceneConfig, n_train: int, n_val: int) -> Tuple[range, range]:
    """
    Disjoint train and validation index streams.

    Returns:
        (range(0, n_train), range(n_train, n_train + n_val))
    """
    if n_train < 1 or n_val < 1:
        raise ValueError(f"n_train and n_val must be >= 1, got {n_train}, {n_val}")
    logger.debug(f"Split for seed {config.seed}: {n_train} train, {n_val} validation samples")
    return range(0, n_train), range(n_train, n_train + n_val)


def collate(samples: Sequence[Sample]) -> Batch:
    """Stack samples into a batch."""
    if not samples:
        raise ValueError("cannot collate an empty list of samples")
    return Batch(
        images=np.stack([s.image for s in samples]),
        seg=np.stack([s.seg for s in samples]),
        depth=np.stack([s.depth for s in samples]),
        normals=np.stack([s.normals for s in samples]),
        indices=[s.index for s in samples],
    )


def generate_batch(config: SceneConfig, indices: Sequence[int]) -> Batch:
    return collate([generate_sample(config, int(i)) for i in indices])


def iter_batches(config: SceneConfig, indices: Sequence[int], batch_size: int) -> Iterator[Batch]:
    """Consecutive batches over `indices`; the last one may be short."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    indices = list(indices)
    for start in range(0, len(indices), batch_size):
        yield generate_batch(config, indices[start : start + batch_size])
