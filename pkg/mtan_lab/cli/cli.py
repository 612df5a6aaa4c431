"""
Command-line interface implementation.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from ..analysis.compare import compare_configs, params_table, tower_increment
from ..analysis.masks import STATS_FILENAME, dump_masks, mask_statistics
from ..config import ConfigurationError, ConfigurationManager
from ..model.builder import build_model, forward_trace
from ..model.gradcheck import COORDINATES_PER_INSTANCE, check_model
from ..persistence.checkpoint import CheckpointError, load_checkpoint, restore_model
from ..synth_data.export import write_samples
from ..synth_data.generator import generate_sample, iter_batches, make_split
from ..tasks.models import MetricReport
from ..tensor_engine import Tensor
from ..tensor_engine.gradcheck import PRIMITIVE_CASES, GradcheckResult, run_primitive_suite
from ..training.trainer import Trainer, evaluate

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

GRADCHECK_MODULES = sorted(PRIMITIVE_CASES) + ["model"]


class UsageError(Exception):
    """Raised for bad invocations that argparse cannot detect (missing files)."""


def setup_logging(level: str = "INFO") -> None:
    """Set up logging configuration."""
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def _existing_file(path: str, what: str) -> Path:
    resolved = Path(path)
    if not resolved.is_file():
        raise UsageError(f"{what} not found: {path}")
    return resolved


def format_report(report: MetricReport, title: str) -> str:
    """Format a metric report for display."""
    lines = [f"\n📊 {title}", "=" * 60]
    labels = {
        "miou": "mIoU",
        "pix_acc": "Pixel Accuracy",
        "abs_err": "Depth Abs Err",
        "rel_err": "Depth Rel Err",
        "angle_mean_deg": "Normals Mean Angle (deg)",
        "angle_median_deg": "Normals Median Angle (deg)",
        "within_11_25": "Within 11.25 deg",
        "within_22_5": "Within 22.5 deg",
        "within_30": "Within 30 deg",
    }
    for key, value in report.model_dump().items():
        if value is not None:
            lines.append(f"{labels[key]}: {value:.4f}")
    return "\n".join(lines)


def format_gradcheck(results: Sequence[GradcheckResult]) -> str:
    """Format gradient-check results as a table."""
    lines = ["\n🔍 GRADIENT CHECK (central finite differences)", "=" * 60]
    for result in results:
        status = "✅ PASS" if result.passed else "❌ FAIL"
        lines.append(
            f"{result.name:<24} max rel err {result.max_error:.3e}  "
            f"tol {result.tolerance:.0e}  n={result.instances}  {status}"
        )
    return "\n".join(lines)


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser."""
    parser = argparse.ArgumentParser(
        prog="mtan-lab",
        description="Multi-task attention networks - train, evaluate and inspect on synthetic scenes",
    )
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default="INFO",
        help="Logging level (default: INFO)",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    train_parser = subparsers.add_parser("train", help="Train a configuration")
    source = train_parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", help="Config file (.yaml or key=value)")
    source.add_argument("--resume", help="Continue from this checkpoint instead of starting fresh")
    train_parser.add_argument("--out-dir", help="Output directory (default: config out_dir)")

    eval_parser = subparsers.add_parser("eval", help="Evaluate a checkpoint on its validation split")
    eval_parser.add_argument("--ckpt", required=True, help="Checkpoint file")

    grad_parser = subparsers.add_parser("gradcheck", help="Run the finite-difference gradient suite")
    grad_parser.add_argument("--module", choices=GRADCHECK_MODULES, help="Check one primitive or 'model'")
    grad_parser.add_argument("--instances", type=int, default=20, help="Random instances per check")
    grad_parser.add_argument("--seed", type=int, default=0, help="Seed of the random instances")
    grad_parser.add_argument(
        "--coordinates",
        type=int,
        default=COORDINATES_PER_INSTANCE,
        help="Model parameter coordinates checked per instance; 0 checks all",
    )
    grad_parser.add_argument(
        "--config", help="Config whose model replaces the built-in toy network for the model check"
    )

    masks_parser = subparsers.add_parser("dump-masks", help="Write attention masks as PGM images")
    masks_parser.add_argument("--ckpt", required=True, help="Checkpoint file")
    masks_parser.add_argument("--sample", type=int, default=0, help="Scene index to run")
    masks_parser.add_argument("--out", required=True, help="Output directory")
    masks_parser.add_argument("--block", type=int, default=0, help="Backbone block (default: first)")
    masks_parser.add_argument("--channels", type=int, nargs="+", help="Channels to dump (default: all)")

    compare_parser = subparsers.add_parser("compare", help="Train several configs and tabulate them")
    compare_parser.add_argument("--configs", required=True, nargs="+", help="Config files")
    compare_parser.add_argument("--out", default="compare", help="Output directory")

    params_parser = subparsers.add_parser("params", help="Print parameter counts without training")
    params_parser.add_argument("--config", required=True, nargs="+", help="Config files")

    export_parser = subparsers.add_parser("export-data", help="Write synthetic scenes to a binary file")
    export_parser.add_argument("--config", required=True, help="Config file (.yaml or key=value)")
    export_parser.add_argument("--split", choices=["train", "val"], default="train", help="Split to export")
    export_parser.add_argument("--out", required=True, help="Output file")

    return parser


def run_train(args: argparse.Namespace) -> int:
    logger = logging.getLogger(__name__)
    if args.resume:
        trainer = Trainer.from_checkpoint(_existing_file(args.resume, "Checkpoint"), out_dir=args.out_dir)
    else:
        config = ConfigurationManager().load_config(_existing_file(args.config, "Configuration file"))
        trainer = Trainer(config, out_dir=args.out_dir)
    summary = trainer.run()
    print(format_report(summary.report, f"VALIDATION AFTER STEP {summary.steps}"))
    print(f"\nCheckpoint: {summary.checkpoint_path}")
    print(f"Run log: {summary.log_path}")
    logger.info(f"Training finished after {summary.steps} steps")
    return EXIT_OK


def run_eval(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(_existing_file(args.ckpt, "Checkpoint"))
    config = checkpoint.train_config()
    model = build_model(config.model, seed=config.seed)
    restore_model(model, checkpoint)
    _, val_indices = make_split(config.scene, config.n_train, config.n_val)
    report = evaluate(model, iter_batches(config.scene, val_indices, config.batch_size), config.tasks)
    print(format_report(report, f"EVALUATION OF {args.ckpt} (step {checkpoint.step})"))
    print(json.dumps(report.model_dump(), indent=2))
    return EXIT_OK


def run_gradcheck(args: argparse.Namespace) -> int:
    if args.instances < 1:
        raise UsageError("--instances must be >= 1")
    if args.coordinates < 0:
        raise UsageError("--coordinates must be >= 0")
    results: List[GradcheckResult] = []
    if args.module != "model":
        names = [args.module] if args.module else None
        results.extend(run_primitive_suite(names, instances=args.instances, seed=args.seed))
    if args.module in (None, "model"):
        model_config = None
        size = 8
        if args.config:
            config = ConfigurationManager().load_config(_existing_file(args.config, "Configuration file"))
            model_config = config.model
            size = max(size, 2 * model_config.spatial_divisor)
        results.append(
            check_model(
                instances=args.instances,
                seed=args.seed,
                config=model_config,
                coordinates=args.coordinates or None,
                size=size,
            )
        )
    print(format_gradcheck(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILURE


def run_dump_masks(args: argparse.Namespace) -> int:
    logger = logging.getLogger(__name__)
    checkpoint = load_checkpoint(_existing_file(args.ckpt, "Checkpoint"))
    config = checkpoint.train_config()
    model = build_model(config.model, seed=config.seed)
    restore_model(model, checkpoint)
    model.eval()

    sample = generate_sample(config.scene, args.sample)
    trace = forward_trace(model, Tensor(sample.image[np.newaxis]))
    written = dump_masks(trace, config.tasks, args.out, block=args.block, channels=args.channels)

    stats = mask_statistics(trace, config.tasks)
    stats_path = Path(args.out) / STATS_FILENAME
    stats.to_csv(stats_path, index=False, encoding="utf-8")
    for row in stats.itertuples():
        logger.info(
            f"mask stats {row.task} module {row.module}: mean {row.mean:.3f}, "
            f"std {row.std:.3f}, contrast {row.contrast:.3f}"
        )
    print(f"Wrote {len(written)} images and {stats_path}")
    return EXIT_OK


def run_compare(args: argparse.Namespace) -> int:
    manager = ConfigurationManager()
    configs = [manager.load_config(_existing_file(path, "Configuration file")) for path in args.configs]
    names = [f"{index:02d}_{Path(path).stem}" for index, path in enumerate(args.configs)]
    table = compare_configs(configs, args.out, names=names)
    print("\n📊 ARCHITECTURE COMPARISON")
    print("=" * 60)
    print(table.to_string(index=False))
    return EXIT_OK


def run_params(args: argparse.Namespace) -> int:
    manager = ConfigurationManager()
    configs = [manager.load_config(_existing_file(path, "Configuration file")) for path in args.config]
    table = params_table(configs)
    print("\n🧮 PARAMETER COUNTS")
    print("=" * 60)
    print(table.to_string(index=False))
    for path, config in zip(args.config, configs):
        increment = tower_increment(config.model)
        print(
            f"{path}: +{increment.tower} parameters per task "
            f"({increment.ratio:.1%} of the {increment.backbone}-parameter backbone)"
        )
    return EXIT_OK


def run_export(args: argparse.Namespace) -> int:
    config = ConfigurationManager().load_config(_existing_file(args.config, "Configuration file"))
    train_indices, val_indices = make_split(config.scene, config.n_train, config.n_val)
    indices = train_indices if args.split == "train" else val_indices
    samples = (generate_sample(config.scene, index) for index in indices)
    count = write_samples(args.out, samples, config.scene.num_classes)
    print(f"Wrote {count} {args.split} samples to {args.out}")
    return EXIT_OK


COMMANDS = {
    "train": run_train,
    "eval": run_eval,
    "gradcheck": run_gradcheck,
    "dump-masks": run_dump_masks,
    "compare": run_compare,
    "params": run_params,
    "export-data": run_export,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Main CLI entry point.

    Returns:
        0 on success, 1 on runtime failure, 2 on usage errors
    """
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE

    setup_logging(args.log_level)
    logger = logging.getLogger(__name__)

    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigurationError) as e:
        logger.error(str(e))
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except CheckpointError as e:
        logger.error(f"Cannot read checkpoint: {e}")
        return EXIT_FAILURE
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
