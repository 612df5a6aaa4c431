"""
Architecture comparison: parameter counts and validation metrics side by side.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from ..config.models import TrainConfig
from ..model.builder import build_model, param_count
from ..model.models import ModelConfig
from ..tasks.models import MetricReport
from ..training.trainer import train


logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["architecture", "weighting", "tasks", "params"] + list(MetricReport.model_fields)


class TowerIncrement(BaseModel):
    """Parameters one extra task adds on top of the shared backbone."""

    model_config = ConfigDict(validate_assignment=True)

    variant: str
    backbone: int = Field(ge=0)
    tower: int = Field(ge=0, description="One task's attention or dense tower")
    ratio: float = Field(ge=0.0, description="tower / backbone")


def tower_increment(config: ModelConfig) -> TowerIncrement:
    """
    Per-task tower size for a model configuration.

    Towers do not depend on the task kind or the number of tasks, so the
    increment is a constant of the backbone widths.
    """
    counts = param_count(build_model(config))
    tower = counts.towers[0] if counts.towers else 0
    return TowerIncrement(
        variant=config.variant,
        backbone=counts.backbone,
        tower=tower,
        ratio=tower / counts.backbone if counts.backbone else 0.0,
    )


def architecture_label(config: ModelConfig) -> str:
    """Variant name, with single-task split networks labelled `single`."""
    if config.variant == "split" and config.num_tasks == 1:
        return "single"
    return config.variant


def params_table(configs: Sequence[TrainConfig]) -> pd.DataFrame:
    """Parameter groups per configuration, without training."""
    rows: List[Dict[str, object]] = []
    for config in configs:
        counts = param_count(build_model(config.model, seed=config.seed))
        increment = tower_increment(config.model)
        rows.append(
            {
                "architecture": architecture_label(config.model),
                "tasks": "+".join(spec.name for spec in config.tasks),
                "backbone": counts.backbone,
                "towers": sum(counts.towers),
                "heads": sum(counts.heads),
                "params": counts.total,
                "tower_increment": increment.tower,
                "increment_ratio": increment.ratio,
            }
        )
    return pd.DataFrame(rows)


def compare_configs(
    configs: Sequence[TrainConfig],
    out_dir: Union[str, Path],
    names: Optional[Sequence[str]] = None,
) -> pd.DataFrame:
    """
    Train each configuration in isolation and tabulate the results.

    Each run writes into its own sub-directory of `out_dir`; the table is also
    written to `out_dir/compare.csv`.

    Returns:
        One row per configuration: architecture, weighting, tasks, #params, metrics
    """
    if names is not None and len(names) != len(configs):
        raise ValueError(f"{len(names)} names for {len(configs)} configurations")
    out = Path(out_dir)
    rows: List[Dict[str, object]] = []
    for index, config in enumerate(configs):
        label = architecture_label(config.model)
        run_name = names[index] if names is not None else f"{index:02d}_{label}"
        logger.info(f"compare: training {run_name} ({label}, {config.weighting.variant} weighting)")
        summary = train(config, out_dir=out / run_name)
        counts = param_count(build_model(config.model, seed=config.seed))
        rows.append(
            {
                "architecture": label,
                "weighting": config.weighting.variant,
                "tasks": "+".join(spec.name for spec in config.tasks),
                "params": counts.total,
                **summary.report.model_dump(),
            }
        )
    table = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "compare.csv", index=False, encoding="utf-8")
    logger.info(f"compare: wrote {len(table)} rows to {out / 'compare.csv'}")
    return table
