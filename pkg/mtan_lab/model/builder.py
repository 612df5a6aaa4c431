"""
Multi-task network construction and the forward pass.

The shared backbone is a symmetric encoder-decoder of conv blocks. Each block
exposes two taps: u (after its first conv stack) and p (after its second).
Task towers read those taps:

- mtan/stan: an attention module per block gates p with a sigmoid mask computed
  from u and the previous module's output;
- dense: a module per block fuses u with the previous module's output, no mask;
- split: no tower, every head reads the backbone's final p.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Literal, NamedTuple, Optional, Tuple, Union

import numpy as np

from ..tasks.models import TaskSpec
from ..tensor_engine import Tensor, ops
from ..tensor_engine.tensor import ShapeError
from .layers import ConvBN, Conv2d, count_parameters, prefixed
from .models import BlockSpec, ModelConfig, ModelConfigError, ParamCount


logger = logging.getLogger(__name__)


def backbone_specs(config: ModelConfig) -> List[BlockSpec]:
    """Encoder blocks follow `channel_widths`; decoder blocks mirror them back to the first width."""
    widths = config.channel_widths
    depth = len(widths)
    specs: List[BlockSpec] = []
    in_channels = config.input_channels
    for width in widths:
        specs.append(BlockSpec(in_channels=in_channels, out_channels=width, position="encoder"))
        in_channels = width
    for j in range(depth):
        out_channels = widths[max(depth - 2 - j, 0)]
        specs.append(BlockSpec(in_channels=in_channels, out_channels=out_channels, position="decoder"))
        in_channels = out_channels
    return specs


class BackboneBlock:
    """Two 3x3 conv+BN+ReLU stacks; u and p are their outputs."""

    def __init__(self, spec: BlockSpec, rng: np.random.Generator, config: ModelConfig):
        self.spec = spec
        kw = {"momentum": config.bn_momentum, "eps": config.bn_eps}
        self.first = ConvBN(spec.in_channels, spec.out_channels, 3, rng, **kw)
        self.second = ConvBN(spec.out_channels, spec.out_channels, 3, rng, **kw)

    def __call__(self, x: Tensor, training: bool) -> Tuple[Tensor, Tensor]:
        u = self.first(x, training)
        return u, self.second(u, training)

    def named_parameters(self) -> Dict[str, Tensor]:
        return {**prefixed("first", self.first.named_parameters()), **prefixed("second", self.second.named_parameters())}

    def named_buffers(self) -> Dict[str, Tensor]:
        return {**prefixed("first", self.first.named_buffers()), **prefixed("second", self.second.named_buffers())}


class SharedBackbone:
    """Encoder blocks pool after themselves; decoder blocks upsample before themselves."""

    def __init__(self, specs: List[BlockSpec], rng: np.random.Generator, config: ModelConfig):
        self.blocks = [BackboneBlock(spec, rng, config) for spec in specs]
        self.encoder_depth = sum(spec.position == "encoder" for spec in specs)

    def __call__(self, x: Tensor, training: bool) -> List[Tuple[Tensor, Tensor]]:
        taps: List[Tuple[Tensor, Tensor]] = []
        h = x
        for block in self.blocks:
            if block.spec.position == "decoder":
                h = ops.upsample_nearest2(h)
            u, p = block(h, training)
            taps.append((u, p))
            h = ops.max_pool2(p) if block.spec.position == "encoder" else p
        return taps

    def named_parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for index, block in enumerate(self.blocks):
            params.update(prefixed(f"block{index}", block.named_parameters()))
        return params

    def named_buffers(self) -> Dict[str, Tensor]:
        buffers: Dict[str, Tensor] = {}
        for index, block in enumerate(self.blocks):
            buffers.update(prefixed(f"block{index}", block.named_buffers()))
        return buffers


Resample = Literal["pool", "upsample"]


class _TowerModule:
    """Shared plumbing of attention and dense modules: f carries the previous module's output."""

    def __init__(
        self,
        spec: BlockSpec,
        prev_channels: Optional[int],
        rng: np.random.Generator,
        config: ModelConfig,
    ):
        self.spec = spec
        self.resample: Resample = "pool" if spec.position == "encoder" else "upsample"
        self._bn = {"momentum": config.bn_momentum, "eps": config.bn_eps}
        self.f: Optional[ConvBN] = None
        if prev_channels is not None:
            self.f = ConvBN(prev_channels, spec.out_channels, 3, rng, **self._bn)

    @property
    def gate_channels(self) -> int:
        return self.spec.out_channels * (1 if self.f is None else 2)

    def gate_input(self, u: Tensor, prev: Optional[Tensor], training: bool) -> Tensor:
        if prev is None:
            if self.f is not None:
                raise ShapeError("this module expects the previous module's output")
            return u
        if self.f is None:
            raise ShapeError("the first module of a tower takes shared features only")
        carried = self.f(prev, training)
        carried = ops.max_pool2(carried) if self.resample == "pool" else ops.upsample_nearest2(carried)
        if carried.shape[2:] != u.shape[2:]:
            raise ShapeError(
                f"previous features resample to {carried.shape[2:]} but the block runs at {u.shape[2:]}"
            )
        return ops.concat_channels(u, carried)

    def _own_parameters(self) -> Dict[str, Tensor]:
        return prefixed("f", self.f.named_parameters()) if self.f is not None else {}

    def _own_buffers(self) -> Dict[str, Tensor]:
        return prefixed("f", self.f.named_buffers()) if self.f is not None else {}


class AttentionModule(_TowerModule):
    """Task-specific soft attention over one shared block: g and h are 1x1, f is 3x3."""

    def __init__(
        self,
        spec: BlockSpec,
        prev_channels: Optional[int],
        rng: np.random.Generator,
        config: ModelConfig,
    ):
        super().__init__(spec, prev_channels, rng, config)
        width = spec.out_channels
        self.g = ConvBN(self.gate_channels, width, 1, rng, activation="relu", **self._bn)
        self.h = ConvBN(width, width, 1, rng, activation=None, zero_bias=True, **self._bn)

    def named_parameters(self) -> Dict[str, Tensor]:
        return {
            **self._own_parameters(),
            **prefixed("g", self.g.named_parameters()),
            **prefixed("h", self.h.named_parameters()),
        }

    def named_buffers(self) -> Dict[str, Tensor]:
        return {**self._own_buffers(), **prefixed("g", self.g.named_buffers()), **prefixed("h", self.h.named_buffers())}


class DenseModule(_TowerModule):
    """Unmasked tower layer: a 3x3 conv stack over u and the carried features."""

    def __init__(
        self,
        spec: BlockSpec,
        prev_channels: Optional[int],
        rng: np.random.Generator,
        config: ModelConfig,
    ):
        super().__init__(spec, prev_channels, rng, config)
        self.merge = ConvBN(self.gate_channels, spec.out_channels, 3, rng, **self._bn)

    def __call__(self, u: Tensor, prev: Optional[Tensor], training: bool = True) -> Tensor:
        return self.merge(self.gate_input(u, prev, training), training)

    def named_parameters(self) -> Dict[str, Tensor]:
        return {**self._own_parameters(), **prefixed("merge", self.merge.named_parameters())}

    def named_buffers(self) -> Dict[str, Tensor]:
        return {**self._own_buffers(), **prefixed("merge", self.merge.named_buffers())}


TowerModule = Union[AttentionModule, DenseModule]


class AttentionOutput(NamedTuple):
    mask: Tensor
    attended: Tensor
    carried: Tensor


def attention_forward(
    u: Tensor,
    p: Tensor,
    prev: Optional[Tensor],
    module: AttentionModule,
    training: bool = True,
) -> AttentionOutput:
    """
    Apply one attention module.

    The mask is sigmoid(h(g(x))) where x is u for the first module and
    concat(u, resample(f(prev))) afterwards; the attended features are mask * p.

    Args:
        u: Block's first-stack features
        p: Block's second-stack features (the gated pool)
        prev: Previous module's output, None for the first module
        module: Parameters of this module
        training: Batch-norm mode

    Returns:
        (mask, attended, carried) with carried = attended
    """
    if u.shape[2:] != p.shape[2:]:
        raise ShapeError(f"u {u.shape} and p {p.shape} are not spatially aligned")
    gate_in = module.gate_input(u, prev, training)
    mask = ops.sigmoid(module.h(module.g(gate_in, training), training))
    attended = ops.elementwise_mul(mask, p)
    return AttentionOutput(mask=mask, attended=attended, carried=attended)


class Head:
    """1x1 projection to a task's output channels plus the task's output transform."""

    def __init__(self, in_channels: int, spec: TaskSpec, rng: np.random.Generator):
        self.spec = spec
        self.conv = Conv2d(in_channels, spec.output_channels, 1, rng)

    def __call__(self, features: Tensor) -> Tensor:
        out = self.conv(features)
        if self.spec.kind == "segmentation":
            return ops.log_softmax_channels(out)
        if self.spec.kind == "normals":
            return ops.l2_normalize_channels(out)
        return out

    def named_parameters(self) -> Dict[str, Tensor]:
        return prefixed("conv", self.conv.named_parameters())


@dataclass
class ForwardTrace:
    """Predictions plus the intermediate features used for mask inspection."""

    predictions: List[Tensor]
    shared: List[Tensor]
    masks: List[List[Tensor]] = field(default_factory=list)
    attended: List[List[Tensor]] = field(default_factory=list)


class MtanModel:
    """Shared backbone, per-task towers and per-task heads."""

    def __init__(
        self,
        config: ModelConfig,
        backbone: SharedBackbone,
        towers: List[List[TowerModule]],
        heads: List[Head],
    ):
        self.config = config
        self.backbone = backbone
        self.towers = towers
        self.heads = heads
        self.training = True

    @property
    def task_specs(self) -> List[TaskSpec]:
        return list(self.config.tasks)

    def train(self) -> "MtanModel":
        self.training = True
        return self

    def eval(self) -> "MtanModel":
        self.training = False
        return self

    def backbone_parameters(self) -> Dict[str, Tensor]:
        return prefixed("backbone", self.backbone.named_parameters())

    def tower_parameters(self, task: int) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        if self.towers:
            for index, module in enumerate(self.towers[task]):
                params.update(prefixed(f"towers.{task}.module{index}", module.named_parameters()))
        return params

    def head_parameters(self, task: int) -> Dict[str, Tensor]:
        return prefixed(f"heads.{task}", self.heads[task].named_parameters())

    def named_parameters(self) -> Dict[str, Tensor]:
        params = self.backbone_parameters()
        for task in range(len(self.heads)):
            params.update(self.tower_parameters(task))
        for task in range(len(self.heads)):
            params.update(self.head_parameters(task))
        return params

    def named_buffers(self) -> Dict[str, Tensor]:
        buffers = prefixed("backbone", self.backbone.named_buffers())
        for task, tower in enumerate(self.towers):
            for index, module in enumerate(tower):
                buffers.update(prefixed(f"towers.{task}.module{index}", module.named_buffers()))
        return buffers

    def parameters(self) -> List[Tensor]:
        return list(self.named_parameters().values())


def build_model(config: ModelConfig, seed: int = 0) -> MtanModel:
    """
    Build and initialise a network deterministically from `seed`.

    Args:
        config: Architecture description
        seed: Initialisation seed

    Returns:
        Model in training mode
    """
    if not config.channel_widths:
        raise ModelConfigError("channel_widths must not be empty")
    if config.variant == "stan" and config.num_tasks != 1:
        raise ModelConfigError(f"stan needs exactly one task, got {config.num_tasks}")

    rng = np.random.default_rng(seed)
    specs = backbone_specs(config)
    backbone = SharedBackbone(specs, rng, config)

    towers: List[List[TowerModule]] = []
    if config.variant != "split":
        module_cls = DenseModule if config.variant == "dense" else AttentionModule
        for _ in config.tasks:
            tower: List[TowerModule] = []
            for index, spec in enumerate(specs):
                prev_channels = specs[index - 1].out_channels if index > 0 else None
                tower.append(module_cls(spec, prev_channels, rng, config))
            towers.append(tower)

    head_channels = specs[-1].out_channels
    heads = [Head(head_channels, task, rng) for task in config.tasks]

    model = MtanModel(config, backbone, towers, heads)
    logger.debug(
        f"Built {config.variant} model with {config.num_tasks} task(s), widths {config.channel_widths}, "
        f"{param_count(model).total} parameters"
    )
    return model


def _check_input(config: ModelConfig, x: Tensor) -> None:
    if len(x.shape) != 4:
        raise ShapeError(f"model input must be [B,C,H,W], got {x.shape}")
    _, channels, height, width = x.shape
    if channels != config.input_channels:
        raise ShapeError(f"model expects {config.input_channels} input channels, got {channels}")
    divisor = config.spatial_divisor
    if height % divisor or width % divisor:
        raise ShapeError(
            f"input size {height}x{width} must be divisible by {divisor} "
            f"(2^{config.encoder_depth} for {config.encoder_depth} encoder blocks)"
        )


def forward_trace(model: MtanModel, x: Tensor) -> ForwardTrace:
    """Run the full forward pass, keeping shared taps, masks and attended features."""
    config = model.config
    _check_input(config, x)
    training = model.training
    taps = model.backbone(x, training)
    trace = ForwardTrace(predictions=[], shared=[p for _, p in taps])

    if config.variant == "split":
        features = taps[-1][1]
        trace.predictions = [head(features) for head in model.heads]
        return trace

    bottleneck = model.backbone.encoder_depth
    for tower, head in zip(model.towers, model.heads):
        prev: Optional[Tensor] = None
        masks: List[Tensor] = []
        attended: List[Tensor] = []
        for index, (module, (u, p)) in enumerate(zip(tower, taps)):
            if index == bottleneck and prev is not None:
                prev = ops.max_pool2(prev)
            if isinstance(module, AttentionModule):
                out = attention_forward(u, p, prev, module, training)
                masks.append(out.mask)
                attended.append(out.attended)
                prev = out.carried
            else:
                prev = module(u, prev, training)
                attended.append(prev)
        assert prev is not None
        trace.masks.append(masks)
        trace.attended.append(attended)
        trace.predictions.append(head(prev))
    return trace


def model_forward(model: MtanModel, x: Tensor) -> List[Tensor]:
    """
    Predict every task for a batch.

    Returns:
        One tensor per task: segmentation log-probabilities [B,C,H,W],
        depth [B,1,H,W] or unit normals [B,3,H,W]
    """
    return forward_trace(model, x).predictions


def param_count(model: MtanModel) -> ParamCount:
    """Exact learnable parameter counts (conv weights/biases and BN affine terms)."""
    backbone = count_parameters(model.backbone_parameters())
    towers = [count_parameters(model.tower_parameters(t)) for t in range(len(model.heads))]
    heads = [count_parameters(model.head_parameters(t)) for t in range(len(model.heads))]
    return ParamCount(backbone=backbone, towers=towers, heads=heads, total=backbone + sum(towers) + sum(heads))
