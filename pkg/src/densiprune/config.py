"""Run configuration: structured key-value text with full defaulting.

Format: one `key = value` per line, `#` comments, blank lines ignored.
Unknown keys are errors. Every effective value, defaults included, is
echoed to <output_dir>/resolved_config so a run's provenance is complete.

Paths are resolved relative to the config file's directory.
"""

from dataclasses import dataclass
from pathlib import Path

from densiprune.arch import builtin_arch, load_arch
from densiprune.datasets import (CIFAR_MEAN, CIFAR_STD, GRAYSCALE_MEAN,
                                 GRAYSCALE_STD, load_cifar_binary, load_idx,
                                 subset)
from densiprune.engine import PruneCriteria
from densiprune.layers import OptimizerConfig


class ConfigError(Exception):
    """Bad configuration or missing referenced file; maps to exit code 2."""


_DATASET_KEYS = {
    "dataset.kind": "idx",
    "dataset.train_images": "",
    "dataset.train_labels": "",
    "dataset.test_images": "",
    "dataset.test_labels": "",
    "dataset.train_files": "",
    "dataset.test_files": "",
    "dataset.subset_per_class": "0",
    "dataset.test_subset_per_class": "0",
    "dataset.mean": "",
    "dataset.std": "",
    "dataset.num_classes": "0",
}

_DEFAULTS = {
    "seed": "1234",
    "output_dir": "run_output",
    "batch_size": "128",
    "epochs_budget": "30",
    "arch.name": "vgg-lite",
    "arch.file": "",
    "optimizer.learning_rate": "0.01",
    "optimizer.momentum": "0.9",
    "optimizer.weight_decay": "0.0005",
    "optimizer.schedule": "auto",
    "criteria.rho_tolerance": "0.001",
    "criteria.rho_window": "2",
    "criteria.rho_min_epochs": "10",
    "criteria.delta_slope_tolerance": "0.0001",
    "criteria.delta_warmup_epochs": "5",
    "criteria.max_rounds": "3",
    "criteria.final_train_epochs": "210",
    **_DATASET_KEYS,
}


def parse_config_text(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _DEFAULTS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def _to_int(values, key, minimum=None):
    try:
        v = int(values[key])
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {values[key]!r}") from None
    if minimum is not None and v < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {v}")
    return v


def _to_float(values, key):
    try:
        return float(values[key])
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {values[key]!r}") from None


def _to_floats(value):
    return tuple(float(v) for v in value.split(",") if v.strip())


@dataclass
class RunConfig:
    values: dict          # fully defaulted key -> string
    base_dir: Path        # directory config paths resolve against

    @classmethod
    def from_file(cls, path, overrides=None):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_text(path.read_text(), base_dir=path.parent,
                             overrides=overrides)

    @classmethod
    def from_text(cls, text, base_dir=".", overrides=None):
        values = dict(_DEFAULTS)
        values.update(parse_config_text(text))
        if overrides:
            for key, val in overrides.items():
                if key not in _DEFAULTS:
                    raise ConfigError(f"unknown override key {key!r}")
                values[key] = str(val)
        cfg = cls(values, Path(base_dir))
        cfg.validate()
        return cfg

    # -- derived accessors ------------------------------------------------

    @property
    def seed(self):
        return _to_int(self.values, "seed")

    @property
    def batch_size(self):
        return _to_int(self.values, "batch_size", minimum=1)

    @property
    def epochs_budget(self):
        return _to_int(self.values, "epochs_budget", minimum=1)

    @property
    def output_dir(self):
        return Path(self.values["output_dir"])

    def _path(self, key):
        value = self.values[key]
        if not value:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def _paths(self, key):
        value = self.values[key]
        if not value:
            return []
        out = []
        for part in value.split(","):
            p = Path(part.strip())
            out.append(p if p.is_absolute() else self.base_dir / p)
        return out

    def validate(self):
        kind = self.values["dataset.kind"]
        if kind not in ("idx", "cifar"):
            raise ConfigError(f"dataset.kind must be idx or cifar, got {kind!r}")
        for key in ("seed", "batch_size", "epochs_budget"):
            _to_int(self.values, key)
        if kind == "idx":
            required = ("dataset.train_images", "dataset.train_labels")
        else:
            required = ("dataset.train_files",)
        for key in required:
            if not self.values[key]:
                raise ConfigError(f"{key} is required for dataset.kind={kind}")
        for key in ("dataset.train_images", "dataset.train_labels",
                    "dataset.test_images", "dataset.test_labels"):
            p = self._path(key)
            if p is not None and not p.is_file():
                raise ConfigError(f"{key}: no such file: {p}")
        for key in ("dataset.train_files", "dataset.test_files"):
            for p in self._paths(key):
                if not p.is_file():
                    raise ConfigError(f"{key}: no such file: {p}")
        if self.values["arch.file"]:
            p = self._path("arch.file")
            if not p.is_file():
                raise ConfigError(f"arch.file: no such file: {p}")
        self.criteria()
        self.optimizer()

    # -- component builders ------------------------------------------------

    def criteria(self):
        try:
            return PruneCriteria(
                rho_tolerance=_to_float(self.values, "criteria.rho_tolerance"),
                rho_window=_to_int(self.values, "criteria.rho_window"),
                rho_min_epochs=_to_int(self.values, "criteria.rho_min_epochs"),
                delta_slope_tolerance=_to_float(self.values, "criteria.delta_slope_tolerance"),
                delta_warmup_epochs=_to_int(self.values, "criteria.delta_warmup_epochs"),
                max_rounds=_to_int(self.values, "criteria.max_rounds"),
                final_train_epochs=_to_int(self.values, "criteria.final_train_epochs"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def optimizer(self):
        schedule_text = self.values["optimizer.schedule"]
        if schedule_text == "auto":
            # x0.1 at 50% and 75% of the full training cycle.
            final = _to_int(self.values, "criteria.final_train_epochs")
            schedule = [(final // 2, 0.1), (final * 3 // 4, 0.1)]
            schedule = [(e, m) for e, m in schedule if e > 0]
            if len({e for e, _ in schedule}) != len(schedule):
                schedule = schedule[:1]
        elif schedule_text in ("", "none"):
            schedule = []
        else:
            schedule = []
            for part in schedule_text.split(","):
                try:
                    epoch, mult = part.split(":")
                    schedule.append((int(epoch), float(mult)))
                except ValueError:
                    raise ConfigError(
                        f"optimizer.schedule entries are epoch:multiplier, got {part!r}"
                    ) from None
        try:
            return OptimizerConfig(
                learning_rate=_to_float(self.values, "optimizer.learning_rate"),
                momentum=_to_float(self.values, "optimizer.momentum"),
                weight_decay=_to_float(self.values, "optimizer.weight_decay"),
                schedule=schedule,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def load_datasets(self):
        """(train, eval) datasets per the dataset.* keys.

        Without a test split the training set doubles as the evaluation
        set; per-epoch accuracies are then training accuracies.
        """
        kind = self.values["dataset.kind"]
        mean = _to_floats(self.values["dataset.mean"])
        std = _to_floats(self.values["dataset.std"])
        declared = _to_int(self.values, "dataset.num_classes")
        if kind == "idx":
            mean = mean or GRAYSCALE_MEAN
            std = std or GRAYSCALE_STD
            train = load_idx(self._path("dataset.train_images"),
                             self._path("dataset.train_labels"),
                             mean=mean, std=std,
                             num_classes=declared or None, name="train")
            test_img = self._path("dataset.test_images")
            evaluation = None
            if test_img is not None:
                evaluation = load_idx(test_img, self._path("dataset.test_labels"),
                                      mean=mean, std=std,
                                      num_classes=declared or train.num_classes,
                                      name="test")
        else:
            mean = mean or CIFAR_MEAN
            std = std or CIFAR_STD
            train = load_cifar_binary(self._paths("dataset.train_files"),
                                      mean=mean, std=std,
                                      num_classes=declared or 10, name="train")
            test_files = self._paths("dataset.test_files")
            evaluation = None
            if test_files:
                evaluation = load_cifar_binary(test_files, mean=mean, std=std,
                                               num_classes=declared or 10,
                                               name="test")
        n_train = _to_int(self.values, "dataset.subset_per_class")
        if n_train:
            train = subset(train, n_train, self.seed)
        if evaluation is None:
            evaluation = train
        else:
            n_test = _to_int(self.values, "dataset.test_subset_per_class")
            if n_test:
                evaluation = subset(evaluation, n_test, self.seed)
        return train, evaluation

    def resolve_arch(self, input_shape, num_classes):
        if self.values["arch.file"]:
            return load_arch(self._path("arch.file"))
        return builtin_arch(self.values["arch.name"], input_shape, num_classes)

    # -- provenance ---------------------------------------------------------

    def resolved_text(self):
        """All effective keys, defaults included, plus the schedule actually
        used when optimizer.schedule = auto."""
        values = dict(self.values)
        if values["optimizer.schedule"] == "auto":
            schedule = self.optimizer().schedule
            values["optimizer.schedule"] = ",".join(
                f"{e}:{m}" for e, m in schedule) or "none"
        lines = [f"{key} = {values[key]}" for key in sorted(values)]
        return "\n".join(lines) + "\n"

    def write_resolved(self, out_dir):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "resolved_config").write_text(self.resolved_text())
