"""
Experiment Configuration Module

This module reads flat experiment files, one ``key = value`` per line with
``#`` comments, against the schema in config/defaults.py:
- parse_config: typed, validated ExperimentConfig with defaults applied
- ExperimentConfig: builds the ArchSpec, ChannelConfig and per-layer
  TrainConfig objects, and renders the fully resolved file for provenance

Every error names the file and line; a duplicate key names both lines.
"""

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from JSCCF.channel.channel import ChannelConfig
from JSCCF.errors import ConfigurationError
from JSCCF.model.arch import ArchSpec
from JSCCF.runner.config.defaults import RESOLVED_CONFIG, SCHEMA, SUBCOMMANDS
from JSCCF.training.trainer import TrainConfig

logger = logging.getLogger("JSCCF.runner.config_parser")

_TRUE = ("true", "yes", "on", "1")
_FALSE = ("false", "no", "off", "0")

# "#" opens a comment at line start or after whitespace; "run#3" stays a value
COMMENT = re.compile(r"(?:^|\s)#.*$")


def _scalar(raw: str, kind: str) -> Any:
    if kind == "int":
        return int(raw)
    if kind == "float":
        value = float(raw)
        if math.isnan(value):
            raise ValueError("nan is not allowed")
        return value
    if kind == "bool":
        lowered = raw.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ValueError(f"expected one of {_TRUE + _FALSE}")
    return raw


def parse_value(raw: str, kind: str) -> Any:
    """Convert the text of one value to its schema type."""
    if kind.endswith("_list"):
        items = [item.strip() for item in raw.split(",")]
        if not raw.strip() or any(not item for item in items):
            raise ValueError("expected a comma-separated list without empty items")
        return tuple(_scalar(item, kind[:-5]) for item in items)
    if not raw:
        raise ValueError("empty value")
    return _scalar(raw, kind)


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ", ".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _check_bounds(key: str, value: Any, entry: dict) -> None:
    values = value if isinstance(value, tuple) else (value,)
    if "choices" in entry and value not in entry["choices"]:
        raise ValueError(f"must be one of {list(entry['choices'])}")
    if "min" in entry and any(v < entry["min"] for v in values):
        raise ValueError(f"must be at least {entry['min']}")


@dataclass
class ExperimentConfig:
    subcommand: str
    values: Dict[str, Any]
    lines: Dict[str, int] = field(default_factory=dict)
    source: str = "<config>"

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def where(self, key: str) -> str:
        line = self.lines.get(key)
        return f"{self.source}:{line}" if line else f"{self.source} (default)"

    def arch_spec(self) -> ArchSpec:
        v = self.values
        common = dict(
            height=v["height"], width=v["width"], channels=v["channels"], kernel_size=v["kernel_size"],
            encoder_widths=v["encoder_widths"], decoder_widths=v["decoder_widths"],
            combiner_widths=v["combiner_widths"],
        )
        if v["channel_uses"] is not None:
            return ArchSpec(channel_uses=v["channel_uses"], **common)
        return ArchSpec.from_bandwidth_ratio(v["bandwidth_ratio"], v["layers"], **common)

    def channel_config(self) -> ChannelConfig:
        v = self.values
        return ChannelConfig(
            forward_kind=v["forward_kind"], forward_snr_db=v["snr_db"],
            feedback_kind=v["feedback_kind"], feedback_snr_db=v["feedback_snr_db"],
            fading_variance=v["fading_variance"], seed=v["seed"],
        )

    def train_configs(self, layers: int, checkpoint_path: Optional[Path] = None) -> List[TrainConfig]:
        v = self.values
        return [
            TrainConfig(
                layer=j, batch_size=v["batch"], learning_rate=v["lr"], max_steps=v["max_steps"],
                patience=v["patience"], tol_improve=v["tol_improve"], eval_every=v["eval_every"],
                validation_fraction=v["val_fraction"], seed=v["seed"], channel=self.channel_config(),
                feedback_ablation=v["feedback_ablation"], loss_reduction=v["loss_reduction"],
                checkpoint_path=checkpoint_path,
            )
            for j in range(1, layers + 1)
        ]

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        values = dict(self.values)
        lines = dict(self.lines)
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in SCHEMA:
                raise ConfigurationError(f"unknown override '{key}'")
            try:
                _check_bounds(key, value, SCHEMA[key])
            except ValueError as e:
                raise ConfigurationError(f"override {key}={value}: {e}") from e
            values[key] = value
            lines.pop(key, None)
        config = ExperimentConfig(self.subcommand, values, lines, self.source)
        config.validate()
        return config

    def resolved_text(self) -> str:
        """Every schema key in schema order; unset keys are echoed as comments."""
        out = []
        for key in SCHEMA:
            value = self.subcommand if key == "subcommand" else self.values[key]
            if value is None:
                out.append(f"# {key} =")
            else:
                out.append(f"{key} = {format_value(value)}")
        return "\n".join(out) + "\n"

    def write_resolved(self, out_dir: Union[str, Path]) -> Path:
        path = Path(out_dir) / RESOLVED_CONFIG
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.resolved_text(), encoding="utf-8")
        logger.debug(f"Wrote resolved configuration to {path}")
        return path

    def validate(self) -> None:
        """Cross-key checks after typing; errors point at the key's line."""
        v = self.values
        for key, entry in SCHEMA.items():
            if self.subcommand in entry.get("required", ()) and v[key] is None:
                raise ConfigurationError(
                    f"{self.source}: missing required key '{key}' for subcommand '{self.subcommand}'"
                )
        if self.subcommand != "gradcheck" and v["dataset"] != "synthetic" and not v["dataset_path"]:
            raise ConfigurationError(f"{self.where('dataset')}: dataset '{v['dataset']}' needs dataset_path")
        if v["val_fraction"] >= 1.0 or v["test_fraction"] >= 1.0:
            raise ConfigurationError(f"{self.source}: val_fraction and test_fraction must be below 1")
        if self.subcommand == "gradcheck":
            return
        try:
            spec = self.arch_spec()
            self.channel_config()
            if self.subcommand == "train":
                self.train_configs(spec.layers)
        except ConfigurationError as e:
            raise ConfigurationError(f"{self.source}: {e}") from e


def parse_config(
    path: Union[str, Path],
    subcommand: Optional[str] = None,
) -> ExperimentConfig:
    """
    Parse and validate an experiment file.

    Args:
        path: UTF-8 file of ``key = value`` lines
        subcommand: Subcommand from the command line; overrides a
            ``subcommand`` key only if both agree

    Returns:
        ExperimentConfig with defaults filled in

    Raises:
        FileNotFoundError: If ``path`` does not exist
        ConfigurationError: On an unknown key, a type or range error, a
            duplicate key or a missing required key
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Configuration file not found: {path}")
    source = str(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ConfigurationError(f"{source}: not valid UTF-8 ({e})") from e

    values: Dict[str, Any] = {}
    lines: Dict[str, int] = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = COMMENT.sub("", raw_line).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{number}: expected 'key = value', got '{line}'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigurationError(f"{source}:{number}: unknown key '{key}'")
        if key in lines:
            raise ConfigurationError(
                f"{source}:{number}: duplicate key '{key}' (first set on line {lines[key]})"
            )
        entry = SCHEMA[key]
        try:
            value = parse_value(raw, entry["type"])
            _check_bounds(key, value, entry)
        except ValueError as e:
            raise ConfigurationError(f"{source}:{number}: invalid value '{raw}' for '{key}' ({e})") from e
        values[key] = value
        lines[key] = number

    file_subcommand = values.get("subcommand")
    if subcommand is not None and file_subcommand is not None and subcommand != file_subcommand:
        raise ConfigurationError(
            f"{source}:{lines['subcommand']}: file is for '{file_subcommand}', "
            f"command line asks for '{subcommand}'"
        )
    chosen = subcommand or file_subcommand
    if chosen not in SUBCOMMANDS:
        raise ConfigurationError(f"{source}: no valid subcommand (expected one of {list(SUBCOMMANDS)})")

    for key, entry in SCHEMA.items():
        values.setdefault(key, entry["default"])
    values["subcommand"] = chosen
    config = ExperimentConfig(chosen, values, lines, source)
    config.validate()
    logger.info(f"Parsed {source}: subcommand '{chosen}', {len(lines)} keys set")
    return config
