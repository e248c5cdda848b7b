"""
Main Module for the JSCCF Experiment Runner

This module orchestrates one experiment per invocation:
1. Parses the experiment file and echoes the resolved configuration
2. Ingests the dataset and splits it into train/val/test
3. Dispatches to the subcommand (train, eval, sweep, varlen, baseline,
   gradcheck) and writes its checkpoints and CSV tables
4. Prints a one-line summary per phase

Usage:
    jsccf <subcommand> --config <path> [--seed N] [--out DIR]

Exit status is 0 on success, 2 on a configuration error and 1 on any other
failure (including a failed gradient check).
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from JSCCF.autodiff.gradcheck import run_gradcheck_suite
from JSCCF.config.logging_config import setup_logging
from JSCCF.errors import ConfigurationError, JsccfError
from JSCCF.evaluation.config.config import EVAL_CSV, GAP_CSV, SWEEP_CSV, VARLEN_CSV
from JSCCF.evaluation.protocols import (
    SweepSpec,
    average_bandwidth_ratio,
    evaluate_model,
    gap_distribution,
    snr_mismatch_sweep,
    variable_length_sweep,
)
from JSCCF.model.checkpoint import load_checkpoint
from JSCCF.model.gradcheck_cases import COMPOSITE_CASES
from JSCCF.model.model import JsccModel, build_model
from JSCCF.runner.artifacts import ArtifactWriter
from JSCCF.runner.config.defaults import CHECKPOINT_NAME, GRADCHECK_CSV, SUBCOMMANDS
from JSCCF.runner.config_parser import ExperimentConfig, parse_config
from JSCCF.runner.datasets import Dataset, load_dataset
from JSCCF.separation.baseline import (
    attach_fallbacks,
    baseline_table,
    capacity_bound_records,
    separation_bandwidth_table,
)
from JSCCF.separation.config.config import BASELINE_CSV, BASELINE_VARLEN_CSV
from JSCCF.separation.tables import load_fer_table, load_rd_curves
from JSCCF.training.trainer import train_model

logger = logging.getLogger("JSCCF.runner.main")


class ExperimentRunner:
    def __init__(self, config: ExperimentConfig):
        """
        Initialize the runner with a validated configuration.

        Args:
            config: Parsed experiment configuration (with command-line overrides applied)
        """
        self.config = config
        self.out_dir = Path(config["out"])
        self.writer: Optional[ArtifactWriter] = None
        self.dataset: Optional[Dataset] = None
        self.summaries: List[str] = []

    def initialize(self) -> None:
        """
        Create the output directory, echo the configuration and ingest the dataset.

        Raises:
            FileNotFoundError: If a dataset path doesn't exist
            IngestionError: If the dataset cannot be read
        """
        logger.info(f"Initializing {self.config.subcommand} run in {self.out_dir}")
        self.writer = ArtifactWriter(self.out_dir)
        self.config.write_resolved(self.out_dir)
        if self.config.subcommand == "gradcheck":
            return
        v = self.config.values
        self.dataset = load_dataset(
            v["dataset_path"], v["dataset"], seed=v["seed"], test_path=v["test_path"],
            val_fraction=v["val_fraction"], test_fraction=v["test_fraction"],
            count=v["synthetic_count"], height=v["height"], width=v["width"], channels=v["channels"],
        )
        shape = self.dataset.image_shape
        expected = (v["height"], v["width"], v["channels"])
        if shape != expected:
            raise ConfigurationError(f"dataset images are {shape}, configuration expects {expected}")
        self._summary("ingest", f"{len(self.dataset.train)}/{len(self.dataset.val)}/{len(self.dataset.test)} "
                                f"train/val/test images of shape {shape}")

    def run(self) -> bool:
        """
        Run the configured subcommand.

        Returns:
            True on success (for gradcheck: every case passed)

        Raises:
            RuntimeError: If the runner is not initialized
        """
        if self.writer is None:
            raise RuntimeError("Runner not initialized. Call initialize() first.")
        handlers: Dict[str, Callable[[], bool]] = {
            "train": self.train,
            "eval": self.evaluate,
            "sweep": self.sweep,
            "varlen": self.varlen,
            "baseline": self.baseline,
            "gradcheck": self.gradcheck,
        }
        return handlers[self.config.subcommand]()

    def _summary(self, phase: str, message: str) -> None:
        line = f"[{phase}] {message}"
        self.summaries.append(line)
        print(line)

    def _load_model(self) -> JsccModel:
        model = load_checkpoint(self.config["checkpoint"])
        expected = (self.config["height"], self.config["width"], self.config["channels"])
        if (model.spec.height, model.spec.width, model.spec.channels) != expected:
            raise ConfigurationError(
                f"checkpoint is for {model.spec.height}x{model.spec.width}x{model.spec.channels} images, "
                f"configuration expects {expected}"
            )
        if not all(model.trained):
            logger.warning(f"Checkpoint has untrained layers: {model.trained}")
        return model

    def train(self) -> bool:
        spec = self.config.arch_spec()
        checkpoint = Path(self.config["checkpoint"] or self.writer.path(CHECKPOINT_NAME))
        model = build_model(spec, seed=self.config["seed"])
        val = self.dataset.val if len(self.dataset.val) else None
        reports = train_model(model, self.dataset.train, self.config.train_configs(spec.layers, checkpoint), val)
        for report in reports:
            self.writer.write_csv(f"train_layer{report.layer}.csv", report.to_frame())
            self._summary(
                f"train layer {report.layer}",
                f"stopped at step {report.stop_step}, best validation loss {report.best_val_loss:.6g} "
                f"at step {report.best_step}",
            )
        self._summary("train", f"checkpoint {checkpoint} (k={spec.channel_uses}, k/n={spec.bandwidth_ratio:.4f})")
        return True

    def evaluate(self) -> bool:
        model = self._load_model()
        channel = self.config.channel_config()
        result = evaluate_model(
            model, self.dataset.test, channel, self.config["realizations"],
            feedback_ablation=self.config["feedback_ablation"],
        )
        self.writer.write_csv(EVAL_CSV, result.to_frame())
        self._summary("eval", "mean PSNR per layer " + ", ".join(f"{m:.2f}" for m in result.mean_psnr_db) + " dB")
        if self.config["rd_csv"]:
            test = self.dataset.test
            curves = attach_fallbacks(load_rd_curves(self.config["rd_csv"]), test)
            bound = capacity_bound_records(
                channel.forward_snr_db, model.spec.k, model.spec.n, curves, range(len(test)),
                channel=channel, realizations=self.config["realizations"],
            )
            gap = gap_distribution(result.records, bound)
            self.writer.write_csv(GAP_CSV, gap.to_frame())
            self._summary("gap", f"JSCC above the capacity bound on {gap.fraction_positive:.0%} of images")
        return True

    def sweep(self) -> bool:
        model = self._load_model()
        spec = SweepSpec(
            snr_test_db=self.config["snr_test_db"], snr_fb_db=self.config["snr_fb_db"] or (),
            realizations=self.config["realizations"], dataset=self.dataset.name,
        )
        frame = snr_mismatch_sweep(
            model, self.dataset.test, self.config.channel_config(), spec,
            feedback_ablation=self.config["feedback_ablation"],
        )
        self.writer.write_csv(SWEEP_CSV, frame)
        self._summary("sweep", f"{len(frame)} rows over {len(spec.snr_test_db)} test SNRs")
        return True

    def varlen(self) -> bool:
        model = self._load_model()
        frame = variable_length_sweep(model, self.dataset.test, self.config.channel_config(), self.config["targets_db"])
        self.writer.write_csv(VARLEN_CSV, frame)
        averages = average_bandwidth_ratio(frame)
        self.writer.write_csv("varlen_summary.csv", averages)
        self._summary("varlen", "; ".join(
            f"{row.target_db:g} dB: k/n={row.mean_bandwidth_ratio:.4f}, met {row.fraction_met:.0%}"
            for row in averages.itertuples()
        ))
        return True

    def baseline(self) -> bool:
        spec = self.config.arch_spec()
        test = self.dataset.test
        curves = attach_fallbacks(load_rd_curves(self.config["rd_csv"]), test)
        configs = load_fer_table(self.config["fer_csv"]) if self.config["fer_csv"] else []
        channel = self.config.channel_config()
        frame = baseline_table(
            self.config["snr_grid"], spec.k, spec.n, curves, configs,
            channel=channel, image_ids=list(range(len(test))),
        )
        self.writer.write_csv(BASELINE_CSV, frame)
        bandwidth = separation_bandwidth_table(self.config["snr_grid"], self.config["targets_db"], curves, spec.n)
        self.writer.write_csv(BASELINE_VARLEN_CSV, bandwidth)
        self._summary("baseline", f"{frame['scheme'].nunique()} schemes over {len(self.config['snr_grid'])} SNRs")
        return True

    def gradcheck(self) -> bool:
        reports = run_gradcheck_suite(
            extra_cases=COMPOSITE_CASES, points=self.config["gradcheck_points"],
            seed=self.config["seed"], tolerance=self.config["gradcheck_tolerance"],
        )
        frame = pd.DataFrame(
            [(r.name, r.points, r.max_rel_error, r.passed) for r in reports],
            columns=["case", "points", "max_rel_error", "passed"],
        )
        self.writer.write_csv(GRADCHECK_CSV, frame)
        failed = [r.name for r in reports if not r.passed]
        for r in reports:
            if not r.passed:
                logger.error(f"Gradient check {r.name} failed: {r.message or f'max error {r.max_rel_error:.3e}'}")
        worst = float(np.max(frame["max_rel_error"])) if len(frame) else 0.0
        self._summary("gradcheck", f"{len(reports) - len(failed)}/{len(reports)} cases passed, "
                                   f"worst relative error {worst:.3e}")
        return not failed


def provenance(error: BaseException) -> str:
    """Module of the innermost frame the error passed through."""
    tb = error.__traceback__
    if tb is None:
        return type(error).__module__
    while tb.tb_next is not None:
        tb = tb.tb_next
    return tb.tb_frame.f_globals.get("__name__", "?")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jsccf", description="Deep JSCC with channel output feedback laboratory")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="experiment file of 'key = value' lines")
    parser.add_argument("--seed", type=int, default=None, help="master seed (overrides the file)")
    parser.add_argument("--out", default=None, help="output directory (overrides the file)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Command-line entry point; returns the process exit status."""
    args = build_parser().parse_args(argv)
    setup_logging()
    try:
        config = parse_config(args.config, args.subcommand).with_overrides(seed=args.seed, out=args.out)
        runner = ExperimentRunner(config)
        runner.initialize()
        ok = runner.run()
    except ConfigurationError as e:
        logger.critical(f"Configuration error in {provenance(e)}: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (JsccfError, OSError) as e:
        logger.critical(f"{type(e).__name__} in {provenance(e)}: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.critical(f"System error: {str(e)}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
