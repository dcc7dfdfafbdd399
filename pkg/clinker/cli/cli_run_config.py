"""
Run configuration of the ``clinker`` command.

A config file is a dotenv-style ``key=value`` document. Values are resolved
with the precedence command line > config file > ``CLINKER_<KEY>`` environment
variable > default, then parsed and range-checked per key.
"""
import logging
import math
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Optional, Tuple

from dotenv import dotenv_values

from clinker.clinker_job_errors import ConfigError
from clinker.mow.mow_sample_windows_dataset import MowConfig, StratifiedWindows, WindowSpec
from clinker.mow.mow_train_predict_pixels import hyperparameter_grid

logger = logging.getLogger(__name__)

ENV_PREFIX = "CLINKER_"
COMMANDS = ("convert", "split", "mow", "analyze", "eval", "mesh")
ALL = COMMANDS
TRUE_WORDS = ("1", "true", "yes", "on")
FALSE_WORDS = ("0", "false", "no", "off")


def _text(value):
    value = value.strip()
    return value or None


def _bool(value):
    word = value.strip().lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    raise ValueError(f"expected one of {TRUE_WORDS + FALSE_WORDS}")


def _optional_float(value):
    return None if value.strip().lower() in ("", "none") else float(value)


def _list(item):
    def parse(value):
        items = tuple(item(part) for part in value.split(",") if part.strip())
        if not items:
            raise ValueError("expected at least one comma-separated value")
        return items
    return parse


def _choice(*options):
    def parse(value):
        value = value.strip().lower()
        if value not in options:
            raise ValueError(f"expected one of {options}")
        return value
    return parse


def _windows(value):
    windows = []
    for part in value.split(";"):
        if not part.strip():
            continue
        numbers = [int(v) for v in part.split(",")]
        if len(numbers) != 3:
            raise ValueError(f"window '{part.strip()}' is not x,y,n")
        windows.append(WindowSpec(*numbers))
    return tuple(windows)


@dataclass(frozen=True)
class ConfigKey:
    default: str
    parse: Callable
    commands: Tuple[str, ...]
    help: str
    check: Optional[Callable] = None
    limits: str = ""


def _all(check):
    return lambda values: all(check(v) for v in values)


CONFIG_KEYS = {
    "input": ConfigKey("", _text, ALL, "Input file: labelme/COCO JSON, image or label map PNG."),
    "labels": ConfigKey("", _text, ("mow",), "Ground-truth label map PNG of the input image."),
    "predictions": ConfigKey("", _text, ("eval",), "Predicted COCO JSON (instance) or label map PNG (pixel)."),
    "ground_truth": ConfigKey("", _text, ("eval",), "Ground-truth COCO JSON (instance) or label map PNG (pixel)."),
    "out_dir": ConfigKey("out", _text, ALL, "Directory receiving the outputs."),
    "seed": ConfigKey("0", int, ALL, "Seed of every random choice.", lambda v: v >= 0, ">= 0"),
    "log_dir": ConfigKey("logs", _text, ALL, "Directory receiving the log file."),
    "quiet": ConfigKey("false", _bool, ALL, "Only show warnings and errors on the console."),
    "workers": ConfigKey("1", int, ALL, "Worker threads.", lambda v: v >= 1, ">= 1"),
    "convert_to": ConfigKey("coco", _choice("coco", "coco-rle", "masks"), ("convert",),
                            "Target: polygon COCO, RLE COCO or label map PNGs."),
    "train_fraction": ConfigKey("0.8", float, ("split",), "Share of particles on the train side.",
                                lambda v: 0.0 < v < 1.0, "in (0, 1)"),
    "folds": ConfigKey("4", int, ("split",), "Cross-validation folds over the train images.",
                       lambda v: v >= 1, ">= 1"),
    "mow_p": ConfigKey("3", int, ("mow",), "Neighbourhood side p.", lambda v: v >= 1 and v % 2 == 1,
                       "a positive odd integer"),
    "mow_windows": ConfigKey("", _windows, ("mow",), "Explicit windows 'x,y,n;x,y,n;...'."),
    "mow_window_count": ConfigKey("10", int, ("mow",), "Number of stratified windows.", lambda v: v >= 1, ">= 1"),
    "mow_window_side": ConfigKey("50", int, ("mow",), "Side of stratified windows.", lambda v: v >= 1, ">= 1"),
    "mow_split_ratios": ConfigKey("0.70,0.15,0.15", _list(float), ("mow",), "Train/val/test ratios.",
                                  lambda v: len(v) == 3 and all(r > 0 for r in v)
                                  and math.isclose(sum(v), 1.0, abs_tol=1e-9),
                                  "three positive values summing to 1"),
    "mow_split_by": ConfigKey("pixel", _choice("pixel", "window"), ("mow",), "Split samples or whole windows."),
    "mow_grayscale": ConfigKey("false", _bool, ("mow",), "Use the luma channel only."),
    "mow_class_weights": ConfigKey("false", _bool, ("mow",), "Inverse-frequency sample weights."),
    "mow_dump_dataset": ConfigKey("false", _bool, ("mow",), "Also write dataset.csv."),
    "mow_trees": ConfigKey("100", _list(int), ("mow",), "Trees per class (comma list).", _all(lambda v: v >= 1),
                           ">= 1"),
    "mow_max_depth": ConfigKey("4", _list(int), ("mow",), "Tree depth (comma list).", _all(lambda v: v >= 1),
                               ">= 1"),
    "mow_learning_rate": ConfigKey("0.1", _list(float), ("mow",), "Learning rate (comma list).",
                                   _all(lambda v: v > 0), "> 0"),
    "mow_subsample": ConfigKey("1.0", _list(float), ("mow",), "Row subsample (comma list).",
                               _all(lambda v: 0 < v <= 1), "in (0, 1]"),
    "min_area": ConfigKey("1", int, ("analyze", "mesh"), "Smallest particle kept, in pixels.",
                          lambda v: v >= 1, ">= 1"),
    "normalization": ConfigKey("linear", _choice("linear", "log"), ("analyze",), "Size normalization map."),
    "point_count_points": ConfigKey("4000", int, ("analyze",), "Point-count sample size.", lambda v: v >= 1, ">= 1"),
    "point_count_mode": ConfigKey("grid", _choice("grid", "random"), ("analyze",), "Point-count layout."),
    "pixel_size": ConfigKey("none", _optional_float, ("analyze",), "Micrometres per pixel.",
                            lambda v: v is None or v > 0, "> 0"),
    "eval_mode": ConfigKey("instance", _choice("pixel", "instance"), ("eval",), "Evaluation level."),
    "iou_threshold": ConfigKey("0.5", float, ("eval",), "IoU needed for a match.", lambda v: 0 < v <= 1,
                               "in (0, 1]"),
    "sweep_step": ConfigKey("0.01", float, ("eval",), "Confidence sweep step.", lambda v: 0 < v <= 1, "in (0, 1]"),
    "average": ConfigKey("macro", _choice("macro", "micro"), ("eval",), "Averaging over phases."),
    "mesh_spacing": ConfigKey("4", float, ("mesh",), "Boundary node spacing in pixels.", lambda v: v >= 1, ">= 1"),
    "mesh_min_angle": ConfigKey("20", float, ("mesh",), "Minimum triangle angle in degrees.",
                                lambda v: 0 <= v <= 34, "in [0, 34]"),
    "mesh_format": ConfigKey("both", _choice("node-ele", "json", "both"), ("mesh",), "Mesh file format."),
    "mesh_label_rule": ConfigKey("centroid", _choice("centroid", "majority"), ("mesh",), "Triangle phase rule."),
    "mesh_svg": ConfigKey("true", _bool, ("mesh",), "Also draw mesh.svg."),
}


@dataclass(frozen=True)
class RunConfig:
    input: Optional[str]
    labels: Optional[str]
    predictions: Optional[str]
    ground_truth: Optional[str]
    out_dir: str
    seed: int
    log_dir: str
    quiet: bool
    workers: int
    convert_to: str
    train_fraction: float
    folds: int
    mow_p: int
    mow_windows: Tuple[WindowSpec, ...]
    mow_window_count: int
    mow_window_side: int
    mow_split_ratios: Tuple[float, ...]
    mow_split_by: str
    mow_grayscale: bool
    mow_class_weights: bool
    mow_dump_dataset: bool
    mow_trees: Tuple[int, ...]
    mow_max_depth: Tuple[int, ...]
    mow_learning_rate: Tuple[float, ...]
    mow_subsample: Tuple[float, ...]
    min_area: int
    normalization: str
    point_count_points: int
    point_count_mode: str
    pixel_size: Optional[float]
    eval_mode: str
    iou_threshold: float
    sweep_step: float
    average: str
    mesh_spacing: float
    mesh_min_angle: float
    mesh_format: str
    mesh_label_rule: str
    mesh_svg: bool

    def require(self, key):
        value = getattr(self, key)
        if value is None:
            raise ConfigError(f"Config key '{key}' is required, set it with --{key.replace('_', '-')}")
        return value

    def mow_config(self):
        sampling = None
        if not self.mow_windows:
            sampling = StratifiedWindows(count=self.mow_window_count, side=self.mow_window_side, seed=self.seed)
        return MowConfig(
            p=self.mow_p,
            windows=self.mow_windows or None,
            sampling=sampling,
            ratios=tuple(self.mow_split_ratios),
            seed=self.seed,
            split_by_window=self.mow_split_by == "window",
        )

    def mow_grid(self):
        return hyperparameter_grid(
            n_trees=self.mow_trees,
            max_depth=self.mow_max_depth,
            learning_rate=self.mow_learning_rate,
            subsample=self.mow_subsample,
        )


def keys_for(command):
    return [key for key, spec in CONFIG_KEYS.items() if command in spec.commands]


def read_config_file(path):
    """Raw values of a config file with lowercase keys; unknown keys raise ConfigError."""
    if not Path(path).is_file():
        raise ConfigError(f"Config file not found: {path}")
    raw = {}
    for key, value in dotenv_values(path).items():
        name = key.strip().lower()
        if name not in CONFIG_KEYS:
            raise ConfigError(f"Unknown config key '{key}' in {path}")
        if value is None:
            raise ConfigError(f"Config key '{key}' in {path} has no value")
        raw[name] = value
    return raw


def read_environment(environ=None):
    environ = os.environ if environ is None else environ
    raw = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower()
        if key not in CONFIG_KEYS:
            logger.warning(f"Ignoring environment variable {name}: not a config key")
            continue
        raw[key] = value
    return raw


def parse_value(key, raw):
    spec = CONFIG_KEYS[key]
    try:
        value = spec.parse(str(raw))
    except ValueError as e:
        raise ConfigError(f"Invalid value {raw!r} for config key '{key}': {e}") from None
    if spec.check is not None and value is not None and not spec.check(value):
        raise ConfigError(f"Config key '{key}' must be {spec.limits}, got {raw!r}")
    return value


def load_run_config(command, cli_values=None, config_path=None, environ=None):
    """
    Resolves every config key for ``command``.

    :param cli_values: Raw strings given on the command line, keyed by config key.
    :param config_path: Optional dotenv-style config file.
    :param environ: Environment mapping, ``os.environ`` by default.
    """
    if command not in COMMANDS:
        raise ConfigError(f"Unknown command '{command}', expected one of {COMMANDS}")
    raw = {key: spec.default for key, spec in CONFIG_KEYS.items()}
    raw.update(read_environment(environ))
    if config_path:
        raw.update(read_config_file(config_path))
    for key, value in (cli_values or {}).items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"Unknown config key '{key}'")
        raw[key] = value
    values = {key: parse_value(key, raw[key]) for key in CONFIG_KEYS}
    for key in ("out_dir", "log_dir"):
        if values[key] is None:
            raise ConfigError(f"Config key '{key}' cannot be empty")
    config = RunConfig(**{f.name: values[f.name] for f in fields(RunConfig)})
    logger.debug(f"Resolved configuration for {command}: {config}")
    return config
