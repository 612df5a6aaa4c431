"""
Training loop: batches, weighted multi-task objective, ADAM, evaluation and checkpoints.
"""

import json
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from ..config.models import TrainConfig
from ..model.builder import MtanModel, build_model, model_forward
from ..persistence import checkpoint as checkpoint_io
from ..synth_data.generator import collate, generate_sample, iter_batches, make_split
from ..synth_data.models import Batch, Sample
from ..tasks.losses import task_loss, total_loss
from ..tasks.metrics import compute_metrics
from ..tasks.models import LabelMap, MetricReport, TaskSpec
from ..tensor_engine import Tape, Tensor, backward
from ..weighting.dwa import current_weights, dwa_signal, end_epoch, record_batch_loss
from ..weighting.models import DwaState
from .models import NonFiniteLossError, RunSummary, StepResult
from .optimizer import Adam
from .run_log import RunLog


logger = logging.getLogger(__name__)

CHECKPOINT_FILENAME = "checkpoint.mtan"
LOG_FILENAME = "log.csv"
REPORT_FILENAME = "report.json"


def evaluate(model: MtanModel, batches: Iterable[Batch], specs: Sequence[TaskSpec]) -> MetricReport:
    """
    Metrics over a whole validation stream, pooled over every pixel.

    The model runs in eval mode (running BN statistics) and is returned to its
    previous mode afterwards. No tape is active, so nothing is recorded.
    """
    was_training = model.training
    model.eval()
    try:
        preds: List[List[np.ndarray]] = [[] for _ in specs]
        labels: List[List[LabelMap]] = [[] for _ in specs]
        for batch in batches:
            outputs = model_forward(model, Tensor(batch.images))
            for k, (out, label) in enumerate(zip(outputs, batch.labels(specs))):
                preds[k].append(out.values)
                labels[k].append(label)
        if not preds or not preds[0]:
            raise ValueError("evaluate needs at least one batch")
        merged = [
            LabelMap(
                kind=parts[0].kind,
                values=np.concatenate([p.values for p in parts]),
                valid=np.concatenate([p.valid for p in parts]),
            )
            for parts in labels
        ]
        return compute_metrics([np.concatenate(p) for p in preds], merged, specs)
    finally:
        if was_training:
            model.train()


class Trainer:
    """Owns one run: model, optimizer, DWA state, data streams and on-disk artifacts."""

    def __init__(self, config: TrainConfig, out_dir: Optional[Union[str, Path]] = None):
        self.config = config
        self.specs = config.tasks
        self.model = build_model(config.model, seed=config.seed)
        self.optimizer = Adam(
            self.model.named_parameters(), lr=config.lr, betas=config.betas, eps=config.eps_adam
        )
        self.dwa = DwaState.fresh(len(self.specs), config.weighting.t)
        self.step = 0

        self.train_indices, self.val_indices = make_split(config.scene, config.n_train, config.n_val)
        self._train_samples: Dict[int, Sample] = {}
        self._val_batches: Optional[List[Batch]] = None

        self.out_dir = Path(out_dir) if out_dir is not None else Path(config.out_dir)
        self.checkpoint_path = self.out_dir / CHECKPOINT_FILENAME
        self.log = RunLog(self.out_dir / LOG_FILENAME, [spec.name for spec in self.specs])

    @classmethod
    def from_checkpoint(cls, path: Union[str, Path], out_dir: Optional[Union[str, Path]] = None) -> "Trainer":
        """
        Rebuild a run from a checkpoint so that it continues bit-identically.

        Args:
            path: Checkpoint written by `save_checkpoint`
            out_dir: Output directory; defaults to the checkpoint's directory
        """
        checkpoint = checkpoint_io.load_checkpoint(path)
        trainer = cls(checkpoint.train_config(), out_dir=out_dir if out_dir is not None else Path(path).parent)
        checkpoint_io.restore_model(trainer.model, checkpoint)
        trainer.optimizer.load_state(checkpoint.adam)
        if checkpoint.dwa is not None:
            trainer.dwa = checkpoint.dwa
        trainer.step = checkpoint.step
        trainer.log = RunLog.resume(trainer.log.path, trainer.log.task_names, checkpoint.step)
        logger.info(f"Resumed run from {path} at step {checkpoint.step}")
        return trainer

    def batch_indices(self, step: int) -> List[int]:
        """Train indices of 1-based `step`: ((step - 1) * B + i) mod n_train."""
        size = self.config.batch_size
        n_train = len(self.train_indices)
        return [self.train_indices[((step - 1) * size + i) % n_train] for i in range(size)]

    def _train_batch(self, step: int) -> Batch:
        samples = []
        for index in self.batch_indices(step):
            if index not in self._train_samples:
                self._train_samples[index] = generate_sample(self.config.scene, index)
            samples.append(self._train_samples[index])
        return collate(samples)

    def validation_batches(self) -> List[Batch]:
        if self._val_batches is None:
            self._val_batches = list(iter_batches(self.config.scene, self.val_indices, self.config.batch_size))
        return self._val_batches

    def train_step(self) -> StepResult:
        """
        One optimisation step on the next batch.

        Raises:
            NonFiniteLossError: Before any parameter is updated
            NonFiniteGradientError: Before any parameter is updated
        """
        step = self.step + 1
        lr = self.config.lr_at(step)
        batch = self._train_batch(step)
        lambdas = current_weights(self.config.weighting, self.dwa)

        labels = batch.labels(self.specs)
        self.model.train()
        with Tape() as tape:
            preds = model_forward(self.model, Tensor(batch.images))
            losses = [task_loss(s, p, y) for s, p, y in zip(self.specs, preds, labels)]
            total = total_loss(losses, lambdas)
        loss_values = [loss.item() for loss in losses]
        if not math.isfinite(total.item()):
            raise NonFiniteLossError(step, loss_values)

        params = self.model.named_parameters()
        backward(total, tape, leaves=list(params.values()))
        self.optimizer.step({name: p.grad for name, p in params.items()}, lr=lr)

        for k, (spec, value) in enumerate(zip(self.specs, loss_values)):
            self.dwa = record_batch_loss(self.dwa, k, dwa_signal(spec, value))
        result = StepResult(
            step=step,
            lr=lr,
            total_loss=total.item(),
            losses=loss_values,
            lambdas=list(lambdas),
            w=list(self.dwa.w),
        )
        if step % self.config.dwa_epoch_len == 0:
            self.dwa = end_epoch(self.dwa)
        self.step = step
        logger.debug(f"step {step}: lr {lr:g}, total {result.total_loss:.6f}, losses {loss_values}")
        return result

    def evaluate(self) -> MetricReport:
        return evaluate(self.model, self.validation_batches(), self.specs)

    def save(self) -> Path:
        path = checkpoint_io.save_checkpoint(
            self.checkpoint_path, self.model, self.optimizer.state, self.dwa, self.step, self.config
        )
        self.log.flush()
        return path

    def run(self, max_steps: Optional[int] = None) -> RunSummary:
        """
        Train until `total_steps` (or `max_steps`, whichever comes first).

        A checkpoint and the CSV log are written every `checkpoint_interval`
        steps and when the loop stops. When the run reaches `total_steps` the
        final validation report is also written as JSON.

        Returns:
            Summary holding the final validation report
        """
        config = self.config
        stop = config.total_steps if max_steps is None else min(config.total_steps, max_steps)
        logger.info(
            f"Training {config.model.variant} with {len(self.specs)} task(s), "
            f"{config.weighting.variant} weighting, steps {self.step + 1}..{stop}, output {self.out_dir}"
        )

        report: Optional[MetricReport] = None
        while self.step < stop:
            result = self.train_step()
            if config.log_every and result.step % config.log_every == 0:
                self.log.append_train(result)
            if result.step % config.eval_every == 0:
                report = self.evaluate()
                self.log.append_eval(result.step, result.lr, report)
                logger.info(f"step {result.step}: {report.model_dump(exclude_none=True)}")
            if result.step % config.checkpoint_interval == 0 and self.step < stop:
                self.save()

        if report is None or self.step % config.eval_every != 0:
            report = self.evaluate()
        checkpoint_path = self.save()

        if self.step >= config.total_steps:
            report_path = self.out_dir / REPORT_FILENAME
            report_path.write_text(json.dumps(report.model_dump(), indent=2), encoding="utf-8")
            logger.info(f"Finished {self.step} steps; final report written to {report_path}")

        return RunSummary(
            steps=self.step,
            report=report,
            checkpoint_path=str(checkpoint_path),
            log_path=str(self.log.path),
        )


def train(config: TrainConfig, out_dir: Optional[Union[str, Path]] = None) -> RunSummary:
    """Run a full training from scratch."""
    return Trainer(config, out_dir=out_dir).run()
