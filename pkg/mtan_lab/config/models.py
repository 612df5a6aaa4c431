"""
Configuration models using Pydantic for validation.
"""

import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..model.models import ModelConfig, default_tasks
from ..synth_data.models import SceneConfig
from ..tasks.models import TaskSpec
from ..weighting.models import WeightingScheme

OUT_DIR_ENV = "MTAN_OUT_DIR"


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV) or "runs")


class TrainConfig(BaseModel):
    """Configuration of one training run."""

    model_config = ConfigDict(validate_assignment=True, extra="forbid")

    model: ModelConfig = Field(default_factory=ModelConfig)
    scene: SceneConfig = Field(default_factory=SceneConfig)
    weighting: WeightingScheme = Field(default_factory=WeightingScheme)
    lr: float = Field(default=1e-3, gt=0.0, description="ADAM learning rate")
    betas: Tuple[float, float] = Field(default=(0.9, 0.999), description="ADAM moment decay rates")
    eps_adam: float = Field(default=1e-8, gt=0.0)
    batch_size: int = Field(default=4, ge=1)
    total_steps: int = Field(default=2000, ge=1)
    lr_halve_at: int = Field(default=1000, ge=0, description="First step trained at lr / 2")
    dwa_epoch_len: int = Field(default=50, ge=1, description="Steps per DWA epoch")
    seed: int = Field(default=0, ge=0, description="Seeds model initialisation")
    eval_every: int = Field(default=200, ge=1, description="Steps between validation passes")
    n_train: int = Field(default=200, ge=1, description="Training scenes")
    n_val: int = Field(default=20, ge=1, description="Validation scenes")
    log_every: int = Field(default=1, ge=0, description="Steps between training CSV rows; 0 disables them")
    checkpoint_every: Optional[int] = Field(
        default=None, ge=1, description="Steps between checkpoints; defaults to eval_every"
    )
    out_dir: Path = Field(default_factory=default_out_dir)

    @model_validator(mode="before")
    @classmethod
    def _expand_tasks(cls, data: Any) -> Any:
        """
        Resolve task shorthands.

        `tasks` may be given at the top level, `model.k` picks the first k
        default tasks, and segmentation takes its class count from the scene.
        """
        if not isinstance(data, dict):
            return data
        data = dict(data)
        model = data.get("model", {})
        if isinstance(model, ModelConfig):
            model = model.model_dump()
        model = dict(model)

        if "tasks" in data:
            if "tasks" in model:
                raise ValueError("tasks given both at the top level and under model")
            model["tasks"] = data.pop("tasks")
        if "k" in model:
            k = int(model.pop("k"))
            defaults = [task.model_dump() for task in default_tasks()]
            if "tasks" not in model:
                if not 1 <= k <= len(defaults):
                    raise ValueError(f"model.k must be between 1 and {len(defaults)}, got {k}")
                model["tasks"] = defaults[:k]
            elif len(model["tasks"]) != k:
                raise ValueError(f"model.k={k} but {len(model['tasks'])} tasks are listed")

        scene = data.get("scene", {})
        num_classes = scene.num_classes if isinstance(scene, SceneConfig) else scene.get("num_classes")
        if num_classes is not None and "tasks" not in model:
            model["tasks"] = [task.model_dump() for task in default_tasks()]
        if num_classes is not None and "tasks" in model:
            model["tasks"] = [_with_classes(task, int(num_classes)) for task in model["tasks"]]
        elif "tasks" in model:
            model["tasks"] = [_with_classes(task, SceneConfig().num_classes) for task in model["tasks"]]

        data["model"] = model
        return data

    @field_validator("betas")
    @classmethod
    def _check_betas(cls, betas: Tuple[float, float]) -> Tuple[float, float]:
        if not all(0.0 <= b < 1.0 for b in betas):
            raise ValueError(f"betas must lie in [0, 1), got {betas}")
        return betas

    @model_validator(mode="after")
    def _check_consistency(self) -> "TrainConfig":
        if self.lr_halve_at > self.total_steps:
            raise ValueError(f"lr_halve_at ({self.lr_halve_at}) must not exceed total_steps ({self.total_steps})")
        for task in self.model.tasks:
            if task.kind == "segmentation" and task.num_classes != self.scene.num_classes:
                raise ValueError(
                    f"segmentation task has {task.num_classes} classes but the scene has {self.scene.num_classes}"
                )
        divisor = self.model.spatial_divisor
        height, width = self.scene.image_size
        if height % divisor or width % divisor:
            raise ValueError(f"image_size {self.scene.image_size} must be divisible by {divisor}")
        return self

    @property
    def tasks(self) -> List[TaskSpec]:
        return list(self.model.tasks)

    @property
    def checkpoint_interval(self) -> int:
        return self.checkpoint_every if self.checkpoint_every is not None else self.eval_every

    def lr_at(self, step: int) -> float:
        """Learning rate used at 1-based `step`."""
        return self.lr / 2 if step >= self.lr_halve_at else self.lr


def _with_classes(task: Any, num_classes: int) -> Any:
    if isinstance(task, TaskSpec):
        return task
    if isinstance(task, str):
        task = {"kind": task}
    if isinstance(task, dict) and task.get("kind") == "segmentation" and task.get("num_classes") is None:
        return {**task, "num_classes": num_classes}
    return task


def config_echo(config: TrainConfig) -> Dict[str, Any]:
    """JSON-ready dump of a config."""
    return config.model_dump(mode="json")
