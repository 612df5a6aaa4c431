"""
Multi-task network builder.

This module constructs the shared encoder-decoder backbone, the per-task
attention towers, the split/dense/stan baselines and the prediction heads,
and runs the forward pass.
"""

from .models import BlockSpec, ModelConfig, ModelConfigError, ParamCount
from .builder import (
    AttentionModule,
    AttentionOutput,
    DenseModule,
    ForwardTrace,
    Head,
    MtanModel,
    SharedBackbone,
    attention_forward,
    backbone_specs,
    build_model,
    forward_trace,
    model_forward,
    param_count,
)

__all__ = [
    "BlockSpec",
    "ModelConfig",
    "ModelConfigError",
    "ParamCount",
    "AttentionModule",
    "AttentionOutput",
    "DenseModule",
    "ForwardTrace",
    "Head",
    "MtanModel",
    "SharedBackbone",
    "attention_forward",
    "backbone_specs",
    "build_model",
    "forward_trace",
    "model_forward",
    "param_count",
]
