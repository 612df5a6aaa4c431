"""
Integration tests for the command-line workflow and architecture comparison.
"""

import json

import pandas as pd
import pytest
import yaml

from mtan_lab.analysis import compare_configs, params_table, tower_increment
from mtan_lab.cli.cli import EXIT_OK, main
from mtan_lab.config import TrainConfig
from mtan_lab.model import ModelConfig
from mtan_lab.tasks.models import TaskSpec
from tests.conftest import tiny_config_dict


def write_config(path, **overrides):
    values = tiny_config_dict(**overrides)
    path.write_text(yaml.safe_dump(values))
    return path


class TestCliWorkflow:
    """Test train, eval and dump-masks chained through main()."""

    def test_train_eval_dump(self, tmp_path, capsys):
        """Test a trained checkpoint can be evaluated and its masks dumped."""
        out_dir = tmp_path / "run"
        config_path = write_config(tmp_path / "tiny.yaml", out_dir=str(out_dir), total_steps=4, lr_halve_at=2)

        assert main(["train", "--config", str(config_path)]) == EXIT_OK
        checkpoint = out_dir / "checkpoint.mtan"
        assert checkpoint.exists()
        assert "VALIDATION AFTER STEP 4" in capsys.readouterr().out

        assert main(["eval", "--ckpt", str(checkpoint)]) == EXIT_OK
        printed = capsys.readouterr().out
        report = json.loads(printed[printed.index("{") :])
        stored = json.loads((out_dir / "report.json").read_text())
        assert report == pytest.approx(stored)

        masks_dir = tmp_path / "masks"
        args = ["dump-masks", "--ckpt", str(checkpoint), "--out", str(masks_dir), "--channels", "0", "1"]
        assert main(args) == EXIT_OK
        assert (masks_dir / "shared_b0_c1.pgm").exists()
        assert (masks_dir / "task2_normals_b0_c0_mask.pgm").exists()
        stats = pd.read_csv(masks_dir / "mask_stats.csv")
        assert set(stats["task"]) == {"segmentation", "depth", "normals"}

    def test_train_out_dir_override(self, tmp_path):
        """Test --out-dir wins over the configured directory."""
        config_path = write_config(
            tmp_path / "tiny.yaml", out_dir=str(tmp_path / "ignored"), total_steps=1, lr_halve_at=1
        )
        target = tmp_path / "chosen"
        assert main(["train", "--config", str(config_path), "--out-dir", str(target)]) == EXIT_OK
        assert (target / "checkpoint.mtan").exists()
        assert not (tmp_path / "ignored").exists()

    def test_resume_from_cli(self, tmp_path):
        """Test train --resume continues a stopped run to total_steps."""
        from mtan_lab.training import Trainer

        config = TrainConfig(**tiny_config_dict(out_dir=str(tmp_path / "run")))
        Trainer(config).run(max_steps=2)
        assert main(["train", "--resume", str(tmp_path / "run" / "checkpoint.mtan")]) == EXIT_OK
        log = pd.read_csv(tmp_path / "run" / "log.csv")
        assert (log["phase"] == "train").sum() == 6
        assert (tmp_path / "run" / "report.json").exists()

    def test_dump_masks_on_split_fails(self, tmp_path):
        """Test a split checkpoint has no masks to dump."""
        out_dir = tmp_path / "split"
        config_path = write_config(
            tmp_path / "split.yaml",
            out_dir=str(out_dir),
            model={"variant": "split", "tasks": ["segmentation", "depth"], "channel_widths": [2, 4]},
            total_steps=1,
            lr_halve_at=1,
        )
        assert main(["train", "--config", str(config_path)]) == EXIT_OK
        args = ["dump-masks", "--ckpt", str(out_dir / "checkpoint.mtan"), "--out", str(tmp_path / "m")]
        assert main(args) == 1


class TestComparison:
    """Test side-by-side architecture tables."""

    def test_compare_trains_each_config(self, tmp_path):
        """Test one row per configuration, in order, with its own run directory."""
        configs = [
            TrainConfig(**tiny_config_dict(total_steps=2, lr_halve_at=1, eval_every=2)),
            TrainConfig(
                **tiny_config_dict(
                    model={
                        "variant": "split",
                        "tasks": ["segmentation", "depth", "normals"],
                        "channel_widths": [2, 4],
                    },
                    total_steps=2,
                    lr_halve_at=1,
                    eval_every=2,
                    weighting={"variant": "dwa"},
                )
            ),
        ]
        table = compare_configs(configs, tmp_path / "cmp", names=["mtan", "split"])
        assert table["architecture"].tolist() == ["mtan", "split"]
        assert table["weighting"].tolist() == ["equal", "dwa"]
        assert table.loc[0, "params"] > table.loc[1, "params"]
        assert table["miou"].notna().all()
        assert (tmp_path / "cmp" / "compare.csv").exists()
        assert (tmp_path / "cmp" / "mtan" / "report.json").exists()
        assert (tmp_path / "cmp" / "split" / "report.json").exists()

    def test_compare_names_must_align(self, tmp_path):
        """Test a name per configuration is required."""
        with pytest.raises(ValueError):
            compare_configs([TrainConfig(**tiny_config_dict())], tmp_path, names=["a", "b"])

    def test_cli_compare(self, tmp_path, capsys):
        """Test the compare subcommand prints the table."""
        path = write_config(tmp_path / "one.yaml", total_steps=1, lr_halve_at=1, eval_every=1)
        assert main(["compare", "--configs", str(path), "--out", str(tmp_path / "cmp")]) == EXIT_OK
        assert "ARCHITECTURE COMPARISON" in capsys.readouterr().out
        assert (tmp_path / "cmp" / "00_one" / "checkpoint.mtan").exists()


class TestParameterTables:
    """Test parameter accounting across task counts."""

    def test_tower_increment_constant_across_tasks(self):
        """Test each extra task adds one tower of the same size plus its head."""
        tasks = [TaskSpec(kind="segmentation", num_classes=5), TaskSpec(kind="depth"), TaskSpec(kind="normals")]
        configs = [
            TrainConfig(model={"variant": "mtan", "tasks": [t.model_dump() for t in tasks[:k]]})
            for k in (1, 2, 3)
        ]
        table = params_table(configs)
        assert table["tower_increment"].nunique() == 1
        tower = int(table.loc[0, "tower_increment"])
        assert tower == 4496
        assert table.loc[0, "backbone"] == 7368
        assert table.loc[1, "params"] - table.loc[0, "params"] == tower + 9
        assert table.loc[2, "params"] - table.loc[1, "params"] == tower + 27
        assert table.loc[2, "params"] == 20937

    def test_increment_ratio(self):
        """Test the tower adds a fixed fraction of the backbone."""
        increment = tower_increment(ModelConfig())
        assert increment.ratio == pytest.approx(4496 / 7368)

    def test_split_has_no_towers(self):
        """Test split models spend parameters only on the backbone and heads."""
        table = params_table([TrainConfig(model={"variant": "split"})])
        assert table.loc[0, "towers"] == 0
        assert table.loc[0, "params"] == 7449

    def test_single_task_label(self):
        """Test single-task split networks are labelled as such."""
        table = params_table([TrainConfig(model={"variant": "split", "tasks": ["depth"]})])
        assert table.loc[0, "architecture"] == "single"
