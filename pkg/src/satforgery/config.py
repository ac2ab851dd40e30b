"""Run configuration: declared defaults, INI-style file, flag overrides.

Every consumed key is declared in DEFAULTS as "section.key" -> default
value; the default's Python type fixes how file/flag strings are parsed.
Unknown keys in a config file or override are rejected. Precedence is
flags > config file > defaults, and the merged result can be written next
to a command's outputs for provenance.
"""

import configparser
import os
from dataclasses import dataclass, field

CONFIG_ENV_VAR = "SATFORGERY_CONFIG"

DEFAULTS = {
    # dataset generation
    "data.dir": "data",
    "data.count": 130,           # number of base images
    "data.height": 650,
    "data.width": 650,
    "data.seed": 0,
    # patch pipeline
    "pipeline.patch_size": 64,
    "pipeline.stride": 32,
    "pipeline.aggregate": "mean",
    "pipeline.threshold": 0.0,
    # training
    "train.arch": "A4",
    "train.epochs": 100,
    "train.batch_size": 128,
    "train.gen_lr": 0.001,
    "train.disc_lr": 0.001,
    "train.rec_weight": 0.999,
    "train.seed": 0,
    "train.checkpoint_dir": "checkpoints",
    # one-class SVM
    "svm.gamma": 1.0 / 2048.0,
    "svm.nu": 1e-5,
    "svm.tol": 1e-6,
    "svm.max_iter": 100000,
    "svm.standardize": False,
    # execution
    "run.workers": 0,            # 0 = all available cores
}


class ConfigError(ValueError):
    pass


def _parse_value(key, raw, default):
    if isinstance(default, bool):
        lowered = str(raw).strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    return str(raw)


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: dict(DEFAULTS))
    source_file: str | None = None
    overrides: dict = field(default_factory=dict)

    def __getitem__(self, key):
        if key not in self.values:
            raise ConfigError(f"unknown config key {key!r}")
        return self.values[key]

    def set(self, key, value):
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(value, str):
            value = _parse_value(key, value, DEFAULTS[key])
        self.values[key] = value
        self.overrides[key] = value

    def write_effective(self, path):
        """Dump the merged configuration, grouped by section."""
        parser = configparser.ConfigParser()
        for key in sorted(self.values):
            section, name = key.split(".", 1)
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, name, str(self.values[key]))
        with open(path, "w") as fh:
            if self.source_file:
                fh.write(f"# merged from {self.source_file} plus overrides\n")
            parser.write(fh)


def load_config(path=None, overrides=()):
    """Build a RunConfig from defaults, an optional file and overrides.

    `path=None` falls back to the CONFIG_ENV_VAR environment variable;
    `overrides` is an iterable of "section.key=value" strings.
    """
    config = RunConfig()
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if path:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        config.source_file = str(path)
        for section in parser.sections():
            for name, raw in parser.items(section):
                key = f"{section}.{name}"
                if key not in DEFAULTS:
                    raise ConfigError(f"{path}: unknown config key {key!r}")
                config.values[key] = _parse_value(key, raw, DEFAULTS[key])
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, value = item.partition("=")
        config.set(key.strip(), value.strip())
    return config
