"""
Basic test to verify the testing framework is working.
"""

import pytest
from pydantic import ValidationError

from mtan_lab.config.models import TrainConfig


def test_train_config_creation():
    """Test that TrainConfig can be created with the desk-scale defaults."""
    config = TrainConfig()

    assert config.model.variant == "mtan"
    assert config.model.channel_widths == [8, 16]
    assert [task.kind for task in config.tasks] == ["segmentation", "depth", "normals"]
    assert config.scene.image_size == (32, 32)
    assert config.lr == 1e-3
    assert config.batch_size == 4
    assert config.total_steps == 2000
    assert config.lr_halve_at == 1000
    assert config.weighting.variant == "equal"


def test_train_config_validation():
    """Test that TrainConfig validates input parameters."""
    config = TrainConfig(lr=5e-4, total_steps=100, lr_halve_at=50, weighting={"variant": "dwa", "t": 2.0})

    assert config.lr == 5e-4
    assert config.weighting.variant == "dwa"
    assert config.lr_at(49) == 5e-4
    assert config.lr_at(50) == 2.5e-4

    with pytest.raises(ValidationError):
        TrainConfig(lr=0.0)
    with pytest.raises(ValidationError):
        TrainConfig(total_steps=10, lr_halve_at=11)
    with pytest.raises(ValidationError):
        TrainConfig(total_steps=0)
