"""
Unit tests for binary checkpoints.
"""

import json
import struct

import numpy as np
import pytest

from mtan_lab.model import ModelConfig, build_model
from mtan_lab.persistence import (
    BadMagicError,
    CheckpointError,
    DimensionOverflowError,
    MalformedCheckpointError,
    TruncatedCheckpointError,
    VersionMismatchError,
    decode_checkpoint,
    load_checkpoint,
    restore_model,
    save_checkpoint,
)
from mtan_lab.persistence.checkpoint import BACKUP_SUFFIX, MAGIC
from mtan_lab.training import Trainer


def header(version=1, echo=None):
    """Magic, version and a minimal JSON echo."""
    echo = echo if echo is not None else {"config": {}, "step": 0, "adam_step": 0}
    text = json.dumps(echo).encode("utf-8")
    return MAGIC + struct.pack("<I", version) + struct.pack("<I", len(text)) + text


def tensor_record(name, dims, data=b""):
    raw = name.encode("utf-8")
    parts = [struct.pack("<I", len(raw)), raw, struct.pack("<I", len(dims))]
    parts += [struct.pack("<I", d) for d in dims]
    return b"".join(parts) + data


@pytest.fixture
def trained(tiny_config):
    """A trainer two steps in, with its checkpoint written."""
    trainer = Trainer(tiny_config)
    trainer.train_step()
    trainer.train_step()
    trainer.save()
    return trainer


class TestSaveLoad:
    """Test a written checkpoint restores the exact run state."""

    def test_bit_identical_state(self, trained):
        """Test parameters, buffers, moments and DWA state come back unchanged."""
        checkpoint = load_checkpoint(trained.checkpoint_path)
        assert checkpoint.step == 2
        assert checkpoint.adam.step == 2
        for name, tensor in trained.model.named_parameters().items():
            np.testing.assert_array_equal(checkpoint.params[name], tensor.values)
            np.testing.assert_array_equal(checkpoint.adam.m[name], trained.optimizer.state.m[name])
            np.testing.assert_array_equal(checkpoint.adam.v[name], trained.optimizer.state.v[name])
        for name, tensor in trained.model.named_buffers().items():
            np.testing.assert_array_equal(checkpoint.buffers[name], tensor.values)
        assert checkpoint.dwa == trained.dwa
        assert checkpoint.train_config() == trained.config

    def test_trainer_from_checkpoint(self, trained):
        """Test a rebuilt trainer holds the same model and step."""
        restored = Trainer.from_checkpoint(trained.checkpoint_path)
        assert restored.step == 2
        live = trained.model.named_parameters()
        for name, tensor in restored.model.named_parameters().items():
            np.testing.assert_array_equal(tensor.values, live[name].values)

    def test_backup_on_overwrite(self, trained):
        """Test the previous checkpoint is kept as .backup."""
        first = trained.checkpoint_path.read_bytes()
        trained.train_step()
        trained.save()
        backup = trained.checkpoint_path.with_name(trained.checkpoint_path.name + BACKUP_SUFFIX)
        assert backup.read_bytes() == first
        assert load_checkpoint(trained.checkpoint_path).step == 3

    def test_no_temporary_left_behind(self, trained):
        """Test the atomic write leaves only the checkpoint and the log."""
        names = {p.name for p in trained.out_dir.iterdir()}
        assert names == {"checkpoint.mtan", "log.csv"}


class TestCorruptFiles:
    """Test each corruption maps to its own error code."""

    def test_bad_magic(self, trained):
        """Test a foreign file."""
        data = b"NOTCKPT!" + trained.checkpoint_path.read_bytes()[8:]
        with pytest.raises(BadMagicError) as info:
            decode_checkpoint(data)
        assert info.value.code == "bad_magic"

    def test_version_mismatch(self):
        """Test a newer format version."""
        with pytest.raises(VersionMismatchError) as info:
            decode_checkpoint(header(version=2) + struct.pack("<I", 0))
        assert info.value.code == "version_mismatch"

    @pytest.mark.parametrize("keep", [4, 12, 100, -1])
    def test_truncated(self, trained, keep):
        """Test files cut short anywhere."""
        data = trained.checkpoint_path.read_bytes()
        with pytest.raises(TruncatedCheckpointError) as info:
            decode_checkpoint(data[:keep])
        assert info.value.code == "truncated"

    def test_rank_overflow(self):
        """Test a tensor of rank 9 is refused before reading its data."""
        data = header() + struct.pack("<I", 1) + tensor_record("param/x", [1] * 9)
        with pytest.raises(DimensionOverflowError) as info:
            decode_checkpoint(data)
        assert info.value.code == "dimension_overflow"

    def test_element_overflow(self):
        """Test dims whose product exceeds 2^31 - 1 are refused."""
        data = header() + struct.pack("<I", 1) + tensor_record("param/x", [65536, 65536])
        with pytest.raises(DimensionOverflowError):
            decode_checkpoint(data)

    def test_trailing_bytes(self, trained):
        """Test bytes after the last tensor."""
        with pytest.raises(MalformedCheckpointError) as info:
            decode_checkpoint(trained.checkpoint_path.read_bytes() + b"\x00")
        assert info.value.code == "malformed"

    def test_unknown_tensor_group(self):
        """Test tensor names outside the known groups."""
        record = tensor_record("weights/x", [2], np.zeros(2, dtype="<f8").tobytes())
        with pytest.raises(MalformedCheckpointError):
            decode_checkpoint(header() + struct.pack("<I", 1) + record)

    def test_echo_not_json(self):
        """Test a config echo that is not JSON."""
        text = b"{not json"
        data = MAGIC + struct.pack("<I", 1) + struct.pack("<I", len(text)) + text
        with pytest.raises(MalformedCheckpointError):
            decode_checkpoint(data)

    def test_errors_share_a_base(self):
        """Test callers can catch every corruption at once."""
        for error in (BadMagicError, VersionMismatchError, TruncatedCheckpointError, DimensionOverflowError):
            assert issubclass(error, CheckpointError)


class TestRestoreModel:
    """Test restoring into a live model."""

    def test_architecture_mismatch(self, trained, tmp_path):
        """Test a checkpoint for another architecture is rejected."""
        checkpoint = load_checkpoint(trained.checkpoint_path)
        other = build_model(ModelConfig(variant="split", tasks=trained.specs, channel_widths=[2, 4]))
        with pytest.raises(MalformedCheckpointError, match="names differ"):
            restore_model(other, checkpoint)

    def test_shape_mismatch(self, trained):
        """Test matching names with different widths are rejected."""
        checkpoint = load_checkpoint(trained.checkpoint_path)
        other = build_model(ModelConfig(tasks=trained.specs, channel_widths=[2, 8]))
        with pytest.raises(MalformedCheckpointError, match="shape"):
            restore_model(other, checkpoint)

    def test_save_then_restore_copies_values(self, tmp_path):
        """Test restored tensors equal the saved ones and are not shared."""
        from mtan_lab.config import TrainConfig
        from mtan_lab.training import AdamState

        config = TrainConfig(model={"variant": "stan", "tasks": ["depth"], "channel_widths": [2]})
        source = build_model(config.model, seed=1)
        path = save_checkpoint(tmp_path / "ckpt.mtan", source, AdamState(), None, 0, config)
        target = build_model(config.model, seed=2)
        restore_model(target, load_checkpoint(path))
        for name, tensor in target.named_parameters().items():
            np.testing.assert_array_equal(tensor.values, source.named_parameters()[name].values)
        assert load_checkpoint(path).dwa is None
