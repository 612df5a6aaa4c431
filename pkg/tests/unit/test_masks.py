"""
Unit tests for attention mask dumps and statistics.
"""

import numpy as np
import pytest

from mtan_lab.analysis import dump_masks, mask_statistics, read_pgm, to_8bit, write_pgm
from mtan_lab.model import ModelConfig, build_model, forward_trace
from mtan_lab.tasks.models import TaskSpec
from mtan_lab.tensor_engine import Tensor

SPECS = [TaskSpec(kind="segmentation", num_classes=3), TaskSpec(kind="depth")]


def trace_for(variant):
    model = build_model(ModelConfig(variant=variant, tasks=SPECS, channel_widths=[2, 4]), seed=0)
    x = Tensor(np.random.default_rng(0).uniform(size=(2, 3, 8, 8)))
    return forward_trace(model.eval(), x)


class TestPgm:
    """Test 8-bit rescaling and P5 files."""

    def test_rescale_endpoints(self):
        """Test the minimum maps to 0 and the maximum to 255."""
        pixels = to_8bit(np.array([[0.2, 0.4], [0.6, 1.0]]))
        assert pixels.dtype == np.uint8
        assert pixels.min() == 0 and pixels.max() == 255
        assert pixels[0, 1] == 64

    def test_constant_map(self):
        """Test constant maps become black instead of dividing by zero."""
        assert not to_8bit(np.full((3, 3), 0.5)).any()

    def test_round_trip(self, tmp_path):
        """Test a written image reads back as its 8-bit rescaling."""
        image = np.arange(12.0).reshape(3, 4)
        path = write_pgm(tmp_path / "img.pgm", image)
        assert path.read_bytes().startswith(b"P5\n4 3\n255\n")
        np.testing.assert_array_equal(read_pgm(path), to_8bit(image))

    def test_rejects_3d(self, tmp_path):
        """Test only 2-D maps are written."""
        with pytest.raises(ValueError):
            write_pgm(tmp_path / "img.pgm", np.zeros((2, 2, 2)))


class TestDumpMasks:
    """Test mask image dumps."""

    def test_file_set(self, tmp_path):
        """Test shared, mask and attended images per task and channel."""
        trace = trace_for("mtan")
        written = dump_masks(trace, SPECS, tmp_path, block=0, channels=[0, 1], sample=1)
        names = sorted(p.name for p in written)
        assert len(names) == 2 + 2 * 2 * 2
        assert "shared_b0_c1.pgm" in names
        assert "task0_segmentation_b0_c0_mask.pgm" in names
        assert "task1_depth_b0_c1_attended.pgm" in names
        assert all((tmp_path / name).exists() for name in names)

    def test_mask_image_matches_trace(self, tmp_path):
        """Test a dumped mask is the rescaled mask channel."""
        trace = trace_for("mtan")
        dump_masks(trace, SPECS, tmp_path, block=1, channels=[0], sample=0)
        expected = to_8bit(trace.masks[1][1].values[0, 0])
        np.testing.assert_array_equal(read_pgm(tmp_path / "task1_depth_b1_c0_mask.pgm"), expected)

    def test_all_channels_by_default(self, tmp_path):
        """Test every channel of the block is dumped when none are chosen."""
        trace = trace_for("mtan")
        channels = trace.shared[0].shape[1]
        written = dump_masks(trace, SPECS, tmp_path, block=0)
        assert len(written) == channels * (1 + 2 * len(SPECS))

    @pytest.mark.parametrize("variant", ["split", "dense"])
    def test_models_without_masks(self, variant, tmp_path):
        """Test models without attention are refused."""
        with pytest.raises(ValueError, match="no attention masks"):
            dump_masks(trace_for(variant), SPECS, tmp_path)

    def test_out_of_range(self, tmp_path):
        """Test bad block and channel indices are rejected."""
        trace = trace_for("mtan")
        with pytest.raises(ValueError, match="block"):
            dump_masks(trace, SPECS, tmp_path, block=len(trace.shared))
        with pytest.raises(ValueError, match="channel"):
            dump_masks(trace, SPECS, tmp_path, channels=[99])


class TestMaskStatistics:
    """Test mask summary rows."""

    def test_one_row_per_task_and_module(self):
        """Test rows, columns and value ranges."""
        trace = trace_for("mtan")
        stats = mask_statistics(trace, SPECS)
        assert list(stats.columns) == ["task", "module", "mean", "std", "contrast"]
        assert len(stats) == len(SPECS) * len(trace.shared)
        assert stats["mean"].between(0.0, 1.0).all()
        assert (stats["contrast"] >= 0.0).all()
        first = trace.masks[0][0].values
        assert stats.iloc[0]["mean"] == pytest.approx(first.mean())

    def test_split_refused(self):
        """Test split models have no masks to summarise."""
        with pytest.raises(ValueError):
            mask_statistics(trace_for("split"), SPECS)
