"""
MTAN Lab - multi-task attention networks on a from-scratch numpy autodiff engine.

This package builds a shared encoder-decoder with per-task soft attention
towers (plus split, dense and single-task baselines), trains it on procedurally
generated scenes for segmentation, depth and surface normals, and weights the
task losses equally or with Dynamic Weight Average.
"""

__version__ = "0.1.0"
__author__ = "MTAN Lab Team"

# Lazy imports to keep `import mtan_lab` cheap
__all__ = [
    "ConfigurationManager",
    "TrainConfig",
    "ModelConfig",
    "MtanModel",
    "SceneConfig",
    "TaskSpec",
    "Tensor",
    "Trainer",
    "WeightingScheme",
]


def __getattr__(name: str) -> type:
    """Lazy import for package components."""
    if name == "ConfigurationManager":
        from .config import ConfigurationManager

        return ConfigurationManager
    elif name == "TrainConfig":
        from .config import TrainConfig

        return TrainConfig
    elif name == "ModelConfig":
        from .model import ModelConfig

        return ModelConfig
    elif name == "MtanModel":
        from .model import MtanModel

        return MtanModel
    elif name == "SceneConfig":
        from .synth_data import SceneConfig

        return SceneConfig
    elif name == "TaskSpec":
        from .tasks import TaskSpec

        return TaskSpec
    elif name == "Tensor":
        from .tensor_engine import Tensor

        return Tensor
    elif name == "Trainer":
        from .training import Trainer

        return Trainer
    elif name == "WeightingScheme":
        from .weighting import WeightingScheme

        return WeightingScheme
    else:
        raise AttributeError(f"module '{__name__}' has no attribute '{name}'")
