"""
CSV run log.

One row per logged training step (phase "train") and one per validation pass
(phase "eval"). Columns are fixed for a task list: phase, step, lr, then
loss/lambda/w per task, then every MetricReport field.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import pandas as pd

from ..tasks.models import MetricReport
from .models import StepResult


logger = logging.getLogger(__name__)

METRIC_COLUMNS = list(MetricReport.model_fields)


def log_columns(task_names: Sequence[str]) -> List[str]:
    columns = ["phase", "step", "lr"]
    for prefix in ("loss", "lambda", "w"):
        columns.extend(f"{prefix}_{name}" for name in task_names)
    return columns + METRIC_COLUMNS


class RunLog:
    """Accumulates rows in memory and rewrites the CSV on flush."""

    def __init__(self, path: Union[str, Path], task_names: Sequence[str]):
        if len(set(task_names)) != len(task_names):
            raise ValueError(f"task names must be unique, got {list(task_names)}")
        self.path = Path(path)
        self.task_names = list(task_names)
        self.columns = log_columns(self.task_names)
        self._rows: List[Dict[str, Any]] = []

    @classmethod
    def resume(cls, path: Union[str, Path], task_names: Sequence[str], step: int) -> "RunLog":
        """Reopen an existing log, dropping rows written after `step`."""
        log = cls(path, task_names)
        if log.path.exists():
            frame = pd.read_csv(log.path, float_precision="round_trip")
            if list(frame.columns) != log.columns:
                raise ValueError(f"{log.path} has columns {list(frame.columns)}, expected {log.columns}")
            frame = frame[frame["step"] <= step]
            log._rows = [
                {key: (None if pd.isna(value) else value) for key, value in row.items()}
                for row in frame.to_dict(orient="records")
            ]
            logger.debug(f"Resumed run log {log.path} with {len(log._rows)} rows up to step {step}")
        return log

    def __len__(self) -> int:
        return len(self._rows)

    def append_train(self, result: StepResult) -> None:
        row: Dict[str, Any] = {"phase": "train", "step": result.step, "lr": result.lr}
        for name, loss, lam, w in zip(self.task_names, result.losses, result.lambdas, result.w):
            row[f"loss_{name}"] = loss
            row[f"lambda_{name}"] = lam
            row[f"w_{name}"] = w
        self._rows.append(row)

    def append_eval(self, step: int, lr: float, report: MetricReport) -> None:
        row: Dict[str, Any] = {"phase": "eval", "step": step, "lr": lr}
        row.update(report.model_dump())
        self._rows.append(row)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self._rows, columns=self.columns)

    def flush(self) -> Path:
        """Write every row so far; the file always holds a complete table."""
        self.path.parent.mkdir(parents=True, exist_ok=True)
        temp_file = self.path.with_suffix(".tmp")
        self.to_frame().to_csv(temp_file, index=False, encoding="utf-8")
        temp_file.replace(self.path)
        return self.path
