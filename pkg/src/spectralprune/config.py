"""Flat key-value experiment configuration.

The on-disk format is a plain text document of `section.key = value`
lines (comments with #). Parsing and serialization are mutual fixed
points so a config can be embedded verbatim in run reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ablation import AblationProtocol
from .errors import ConfigError
from .nn import TrainConfig

CONFIG_VERSION = 1

DATASET_SOURCES = ("idx-files", "csv", "synthetic-blobs", "synthetic-regression")

DEFAULTS = {
    "config_version": str(CONFIG_VERSION),
    "seed": "0",
    "output_dir": "runs/default",
    "dataset.source": "synthetic-blobs",
    "dataset.test_fraction": "0.2",
    "dataset.validation_fraction": "0.1",
    "model.sizes": "2,16,8,2",
    "model.activations": "",
    "model.head": "classification",
    "train.optimizer": "adam",
    "train.learning_rate": "0.001",
    "train.batch_size": "64",
    "train.epochs": "1",
    "prune.rho_target": "0.5",
    "prune.iterations": "5",
    "prune.policy": "proportional",
    "prune.calibration_n": "512",
    "prune.epsilon": "1e-8",
    "prune.resample_calibration": "false",
    "recover.epochs": "1",
    "ablation.enabled": "false",
    "ablation.low_upper": "30",
    "ablation.high_lower": "70",
    "ablation.group_size": "5",
    "ablation.trials_per_group": "30",
}


def _parse_bool(text):
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


@dataclass
class ExperimentConfig:
    """Typed view over the flat key-value document."""

    values: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = dict(DEFAULTS)
        merged.update({k: str(v) for k, v in self.values.items()})
        self.values = merged
        if int(self.values["config_version"]) != CONFIG_VERSION:
            raise ConfigError(
                f"unsupported config_version {self.values['config_version']}"
            )
        if self.values["dataset.source"] not in DATASET_SOURCES:
            raise ConfigError(
                f"unknown dataset.source {self.values['dataset.source']!r}"
            )

    # -- raw access -------------------------------------------------------
    def get(self, key, default=None):
        return self.values.get(key, default)

    def get_int(self, key, default=None):
        raw = self.values.get(key)
        if raw is None or raw == "":
            return default
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected integer, got {raw!r}") from exc

    def get_float(self, key, default=None):
        raw = self.values.get(key)
        if raw is None or raw == "":
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected number, got {raw!r}") from exc

    def get_bool(self, key, default=False):
        raw = self.values.get(key)
        if raw is None or raw == "":
            return default
        return _parse_bool(raw)

    # -- typed sections ---------------------------------------------------
    @property
    def seed(self):
        return self.get_int("seed", 0)

    @property
    def output_dir(self):
        return self.values["output_dir"]

    def model_sizes(self):
        try:
            sizes = [int(x) for x in self.values["model.sizes"].split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"model.sizes: {self.values['model.sizes']!r}") from exc
        if len(sizes) < 3:
            raise ConfigError("model.sizes needs input, >=1 hidden, output dims")
        return sizes

    def model_activations(self):
        raw = self.values.get("model.activations", "")
        if not raw.strip():
            return None
        return [x.strip() for x in raw.split(",") if x.strip()]

    def train_config(self, seed_override=None):
        return TrainConfig(
            optimizer=self.values["train.optimizer"],
            learning_rate=self.get_float("train.learning_rate"),
            batch_size=self.get_int("train.batch_size"),
            epochs=self.get_int("train.epochs"),
            rng_seed=self.seed if seed_override is None else seed_override,
        )

    def recover_config(self, seed_override=None):
        # recover.* falls back to the train section where unset
        return TrainConfig(
            optimizer=self.get("recover.optimizer") or self.values["train.optimizer"],
            learning_rate=self.get_float(
                "recover.learning_rate", self.get_float("train.learning_rate")
            ),
            batch_size=self.get_int("recover.batch_size", self.get_int("train.batch_size")),
            epochs=self.get_int("recover.epochs", 1),
            rng_seed=(self.seed if seed_override is None else seed_override) + 1,
        )

    def ablation_protocol(self, seed_override=None):
        return AblationProtocol(
            low_upper=self.get_float("ablation.low_upper"),
            high_lower=self.get_float("ablation.high_lower"),
            group_size=self.get_int("ablation.group_size"),
            trials_per_group=self.get_int("ablation.trials_per_group"),
            rng_seed=self.seed if seed_override is None else seed_override,
        )

    # -- (de)serialization ------------------------------------------------
    def to_text(self):
        lines = [f"{key} = {self.values[key]}" for key in sorted(self.values)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"config line {lineno}: expected key = value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
        return cls(values)

    @classmethod
    def from_file(cls, path):
        try:
            with open(path) as f:
                return cls.from_text(f.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
