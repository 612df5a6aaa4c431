"""
Unit tests for the multi-task network builder and forward pass.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from mtan_lab.model import (
    AttentionModule,
    DenseModule,
    ModelConfig,
    attention_forward,
    backbone_specs,
    build_model,
    forward_trace,
    model_forward,
    param_count,
)
from mtan_lab.model.gradcheck import random_labels
from mtan_lab.tasks.losses import task_loss
from mtan_lab.tasks.models import LabelMap, TaskSpec
from mtan_lab.tensor_engine import ShapeError, Tape, Tensor, backward

SEG5 = TaskSpec(kind="segmentation", num_classes=5)
DEPTH = TaskSpec(kind="depth")
NORMALS = TaskSpec(kind="normals")


def conv_same(x, weight, bias):
    """Stride-1 same-padding cross-correlation written as explicit kernel-offset sums."""
    k = weight.shape[2]
    pad = k // 2
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    height, width = x.shape[2:]
    out = np.zeros((x.shape[0], weight.shape[0], height, width))
    for i in range(k):
        for j in range(k):
            window = padded[:, :, i : i + height, j : j + width]
            out += np.einsum("bchw,oc->bohw", window, weight[:, :, i, j])
    return out + bias[None, :, None, None]


def conv_bn(layer, x, relu=True):
    """Training-mode ConvBN recomputed from its raw parameter arrays."""
    z = conv_same(x, layer.conv.weight.values, layer.conv.bias.values)
    mean = z.mean(axis=(0, 2, 3), keepdims=True)
    var = z.var(axis=(0, 2, 3), keepdims=True)
    gamma = layer.bn.gamma.values[None, :, None, None]
    beta = layer.bn.beta.values[None, :, None, None]
    out = gamma * (z - mean) / np.sqrt(var + layer.bn.eps) + beta
    return np.maximum(out, 0.0) if relu else out


def pool2(x):
    b, c, h, w = x.shape
    return x.reshape(b, c, h // 2, 2, w // 2, 2).max(axis=(3, 5))


def saturate_masks(model, logit):
    """Force every attention mask to sigmoid(logit) by pinning h's output."""
    for tower in model.towers:
        for module in tower:
            module.h.conv.weight.values = np.zeros_like(module.h.conv.weight.values)
            module.h.conv.bias.values = np.full_like(module.h.conv.bias.values, logit)
            module.h.bn.gamma.values = np.zeros_like(module.h.bn.gamma.values)
            module.h.bn.beta.values = np.full_like(module.h.bn.beta.values, logit)


@pytest.fixture
def small_mtan():
    """Three-task attention network at widths [2, 4]."""
    config = ModelConfig(
        tasks=[TaskSpec(kind="segmentation", num_classes=3), DEPTH, NORMALS], channel_widths=[2, 4]
    )
    return build_model(config, seed=3)


@pytest.fixture
def batch():
    return Tensor(np.random.default_rng(0).standard_normal((2, 3, 8, 8)))


class TestModelConfig:
    """Test architecture configuration validation."""

    def test_defaults(self):
        """Test the desk-scale defaults."""
        config = ModelConfig()
        assert config.variant == "mtan"
        assert config.channel_widths == [8, 16]
        assert config.spatial_divisor == 4
        assert config.output_channels == [5, 1, 3]

    def test_stan_requires_single_task(self):
        """Test stan with several tasks is rejected."""
        with pytest.raises(ValidationError):
            ModelConfig(variant="stan", tasks=[DEPTH, NORMALS])

    def test_empty_widths_rejected(self):
        """Test an encoder needs at least one block."""
        with pytest.raises(ValidationError):
            ModelConfig(channel_widths=[])

    def test_unknown_variant_rejected(self):
        """Test only the four known variants are accepted."""
        with pytest.raises(ValidationError):
            ModelConfig(variant="cross_stitch")

    def test_backbone_mirrors_widths(self):
        """Test decoder blocks mirror the encoder widths back to the first width."""
        specs = backbone_specs(ModelConfig(channel_widths=[8, 16, 32]))
        assert [(s.in_channels, s.out_channels) for s in specs] == [
            (3, 8),
            (8, 16),
            (16, 32),
            (32, 16),
            (16, 8),
            (8, 8),
        ]
        assert [s.position for s in specs] == ["encoder"] * 3 + ["decoder"] * 3


class TestParamCount:
    """Exact parameter counts at widths [8, 16] with RGB input."""

    def test_mtan_three_tasks(self):
        """Test backbone, tower and head groups of the default model."""
        counts = param_count(build_model(ModelConfig()))
        assert counts.backbone == 7368
        assert counts.towers == [4496, 4496, 4496]
        assert counts.heads == [45, 9, 27]
        assert counts.total == 20937

    def test_split_three_tasks(self):
        """Test split networks have no towers."""
        counts = param_count(build_model(ModelConfig(variant="split")))
        assert counts.towers == [0, 0, 0]
        assert counts.total == 7449

    def test_dense_tower(self):
        """Test dense towers are larger than attention towers."""
        counts = param_count(build_model(ModelConfig(variant="dense")))
        assert counts.towers == [10584, 10584, 10584]

    def test_structural_ordering(self):
        """Test split < mtan < three independent single-task networks."""
        split = param_count(build_model(ModelConfig(variant="split"))).total
        mtan = param_count(build_model(ModelConfig())).total
        singles = sum(
            param_count(build_model(ModelConfig(variant="split", tasks=[spec]))).total
            for spec in (SEG5, DEPTH, NORMALS)
        )
        assert singles == 22185
        assert split < mtan < singles

    def test_monotone_in_task_count(self):
        """Test adding a task adds parameters but leaves the backbone alone."""
        two = param_count(build_model(ModelConfig(tasks=[SEG5, DEPTH])))
        three = param_count(build_model(ModelConfig()))
        assert three.total > two.total
        assert three.backbone == two.backbone


class TestBuildModel:
    """Test model construction."""

    def test_stan_has_one_tower(self):
        """Test stan builds exactly one attention tower."""
        model = build_model(ModelConfig(variant="stan", tasks=[DEPTH]))
        assert len(model.towers) == 1
        assert len(model.heads) == 1

    def test_tower_length_matches_backbone(self, small_mtan):
        """Test one attention module per backbone block, f absent only on the first."""
        for tower in small_mtan.towers:
            assert len(tower) == len(small_mtan.backbone.blocks)
            assert tower[0].f is None
            assert all(module.f is not None for module in tower[1:])

    def test_kernel_sizes(self, small_mtan):
        """Test g and h are 1x1 and f is 3x3."""
        module = small_mtan.towers[0][1]
        assert module.g.conv.weight.shape[2:] == (1, 1)
        assert module.h.conv.weight.shape[2:] == (1, 1)
        assert module.f.conv.weight.shape[2:] == (3, 3)

    def test_initial_masks_uninformative(self, small_mtan):
        """Test h starts with zero bias."""
        for tower in small_mtan.towers:
            for module in tower:
                assert np.all(module.h.conv.bias.values == 0)

    def test_dense_modules(self):
        """Test dense towers use unmasked modules."""
        model = build_model(ModelConfig(variant="dense", tasks=[DEPTH], channel_widths=[2, 4]))
        assert all(isinstance(module, DenseModule) for module in model.towers[0])

    def test_same_seed_same_parameters(self):
        """Test initialisation is a pure function of the seed."""
        a = build_model(ModelConfig(channel_widths=[2, 4]), seed=7).named_parameters()
        b = build_model(ModelConfig(channel_widths=[2, 4]), seed=7).named_parameters()
        c = build_model(ModelConfig(channel_widths=[2, 4]), seed=8).named_parameters()
        assert list(a) == list(b)
        assert all(np.array_equal(a[name].values, b[name].values) for name in a)
        assert not all(np.array_equal(a[name].values, c[name].values) for name in a)


class TestForward:
    """Test forward shapes, output transforms and input validation."""

    def test_output_shapes(self):
        """Test the default model on a 32x32 batch of two."""
        model = build_model(ModelConfig())
        preds = model_forward(model, Tensor(np.random.default_rng(0).standard_normal((2, 3, 32, 32))))
        assert [p.shape for p in preds] == [(2, 5, 32, 32), (2, 1, 32, 32), (2, 3, 32, 32)]

    def test_normals_are_unit(self, small_mtan, batch):
        """Test the normals head emits unit vectors."""
        normals = model_forward(small_mtan, batch)[2]
        np.testing.assert_allclose(np.linalg.norm(normals.values, axis=1), 1.0, atol=1e-12)

    def test_segmentation_is_log_probabilities(self, small_mtan, batch):
        """Test segmentation outputs normalise over classes."""
        seg = model_forward(small_mtan, batch)[0]
        np.testing.assert_allclose(np.exp(seg.values).sum(axis=1), 1.0, atol=1e-12)

    def test_indivisible_input_names_divisor(self):
        """Test the error names the required divisor."""
        model = build_model(ModelConfig())
        with pytest.raises(ShapeError, match="divisible by 4"):
            model_forward(model, Tensor(np.zeros((1, 3, 30, 30))))

    def test_wrong_channel_count(self, small_mtan):
        """Test inputs must have the configured channel count."""
        with pytest.raises(ShapeError):
            model_forward(small_mtan, Tensor(np.zeros((2, 1, 8, 8))))

    def test_trace_collects_masks(self, small_mtan, batch):
        """Test the trace holds one mask per task and block, each in (0, 1)."""
        trace = forward_trace(small_mtan, batch)
        assert len(trace.masks) == 3
        assert all(len(masks) == 4 for masks in trace.masks)
        for masks, attended in zip(trace.masks, trace.attended):
            for mask, feat, shared in zip(masks, attended, trace.shared):
                assert mask.shape == shared.shape == feat.shape
                assert mask.values.min() > 0 and mask.values.max() < 1

    def test_split_has_no_masks(self, batch):
        """Test split traces carry predictions only."""
        model = build_model(ModelConfig(variant="split", tasks=[DEPTH], channel_widths=[2, 4]))
        trace = forward_trace(model, batch)
        assert trace.masks == []
        assert len(trace.predictions) == 1


class TestAttention:
    """Test the attention module against closed-form expectations."""

    def test_saturated_mask_is_identity(self, small_mtan, batch):
        """Test masks pinned at sigmoid(40) pass the shared features through."""
        saturate_masks(small_mtan, 40.0)
        trace = forward_trace(small_mtan, batch)
        for masks, attended in zip(trace.masks, trace.attended):
            for mask, feat, shared in zip(masks, attended, trace.shared):
                assert np.max(np.abs(mask.values - 1.0)) <= 1e-17
                np.testing.assert_allclose(feat.values, shared.values, rtol=0, atol=1e-15)

    def test_saturated_model_matches_reference(self, small_mtan, batch):
        """Test identity masks reduce every tower to its head on the last shared block."""
        saturate_masks(small_mtan, 40.0)
        small_mtan.eval()
        trace = forward_trace(small_mtan, batch)
        for head, pred in zip(small_mtan.heads, trace.predictions):
            reference = head(trace.shared[-1])
            np.testing.assert_allclose(pred.values, reference.values, rtol=0, atol=1e-10)

    def test_closed_mask_blocks_features(self, small_mtan, batch):
        """Test masks pinned at sigmoid(-40) zero the attended features."""
        saturate_masks(small_mtan, -40.0)
        trace = forward_trace(small_mtan, batch)
        for attended in trace.attended:
            for feat in attended:
                assert np.max(np.abs(feat.values)) < 1e-12

    def test_matches_straight_line_recomputation(self, small_mtan):
        """Test a carried-feature module against an independent numpy rewrite."""
        rng = np.random.default_rng(11)
        module = small_mtan.towers[1][1]
        assert isinstance(module, AttentionModule)
        u = rng.standard_normal((2, 4, 4, 4))
        p = rng.standard_normal((2, 4, 4, 4))
        prev = rng.standard_normal((2, 2, 8, 8))

        out = attention_forward(Tensor(u), Tensor(p), Tensor(prev), module, training=True)

        carried = pool2(conv_bn(module.f, prev))
        gate = conv_bn(module.g, np.concatenate([u, carried], axis=1))
        logits = conv_bn(module.h, gate, relu=False)
        mask = 1.0 / (1.0 + np.exp(-logits))
        np.testing.assert_allclose(out.mask.values, mask, rtol=0, atol=1e-12)
        np.testing.assert_allclose(out.attended.values, mask * p, rtol=0, atol=1e-12)

    def test_first_module_rejects_previous_features(self, small_mtan):
        """Test the first module takes shared features only."""
        module = small_mtan.towers[0][0]
        x = Tensor(np.ones((2, 2, 8, 8)))
        with pytest.raises(ShapeError):
            attention_forward(x, x, x, module)


class TestGradientIsolation:
    """A single task's loss must not reach other tasks' parameters."""

    def test_other_towers_get_zero_gradient(self, small_mtan, batch):
        """Test depth loss leaves segmentation and normals towers and heads untouched."""
        depth_labels = LabelMap.depth(np.random.default_rng(1).uniform(1.0, 3.0, (2, 8, 8)))
        params = small_mtan.named_parameters()
        with Tape() as tape:
            preds = model_forward(small_mtan, batch)
            loss = task_loss(DEPTH, preds[1], depth_labels)
        backward(loss, tape, leaves=list(params.values()))

        for other in (0, 2):
            isolated = {**small_mtan.tower_parameters(other), **small_mtan.head_parameters(other)}
            for name, tensor in isolated.items():
                assert np.all(tensor.grad == 0), name
        assert any(np.any(t.grad != 0) for t in small_mtan.tower_parameters(1).values())
        assert any(np.any(t.grad != 0) for t in small_mtan.backbone_parameters().values())

    @pytest.mark.parametrize("seed", range(10))
    def test_isolation_on_random_models(self, seed):
        """Test every task's loss, on a freshly seeded model, reaches only its own tower and head."""
        config = ModelConfig(
            tasks=[TaskSpec(kind="segmentation", num_classes=3), DEPTH, NORMALS], channel_widths=[2, 4]
        )
        model = build_model(config, seed=seed)
        rng = np.random.default_rng(seed)
        x = Tensor(rng.standard_normal((2, 3, 8, 8)))
        labels = random_labels(config.tasks, 2, 8, 8, rng)
        params = list(model.named_parameters().values())

        for source, spec in enumerate(config.tasks):
            with Tape() as tape:
                preds = model_forward(model, x)
                loss = task_loss(spec, preds[source], labels[source])
            backward(loss, tape, leaves=params)

            for other in range(config.num_tasks):
                if other == source:
                    continue
                isolated = {**model.tower_parameters(other), **model.head_parameters(other)}
                for name, tensor in isolated.items():
                    assert np.all(tensor.grad == 0), f"task {source} reached {other}/{name}"
            assert any(np.any(t.grad != 0) for t in model.head_parameters(source).values())
