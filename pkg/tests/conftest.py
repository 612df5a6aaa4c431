"""
Shared fixtures: a tiny run configuration that trains in well under a second per step.
"""

from typing import Any, Dict

import pytest

from mtan_lab.config.models import TrainConfig


def tiny_config_dict(**overrides: Any) -> Dict[str, Any]:
    """Three tasks, widths [2, 4], 16x16 scenes with 3 classes, 6 steps."""
    config: Dict[str, Any] = {
        "model": {
            "variant": "mtan",
            "tasks": ["segmentation", "depth", "normals"],
            "channel_widths": [2, 4],
        },
        "scene": {"image_size": [16, 16], "num_classes": 3, "shapes_per_scene": [1, 2]},
        "batch_size": 2,
        "total_steps": 6,
        "lr_halve_at": 4,
        "dwa_epoch_len": 2,
        "eval_every": 3,
        "n_train": 8,
        "n_val": 3,
    }
    config.update(overrides)
    return config


@pytest.fixture
def tiny_config(tmp_path) -> TrainConfig:
    """Tiny configuration writing into a temporary directory."""
    return TrainConfig(**tiny_config_dict(out_dir=str(tmp_path / "run")))
