"""Experiment configuration: one INI-style file, sections mirroring the
pipeline stages, lossless round-trip (floats via shortest repr)."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, fields

from . import seqmodel, trainer
from .errors import ConfigError

FOLD_POOLED = "pooled"
FOLD_PER_FOLD = "per-fold"

FEATURE_SETS = ("raw", "handcrafted", "activity2vec")
DATASET_KINDS = ("synthetic", "casas", "har")


@dataclass
class ExperimentConfig:
    # [dataset]
    kind: str = "synthetic"
    path: str = ""
    train_per_class: int = 20  # synthetic kind only
    test_per_class: int = 10
    timesteps: int = 32
    channels: int = 1
    # [window] (ambient event logs)
    k: int = 30
    stride: int = 15
    # [model]
    embedding_dim: int = 32
    mode: str = seqmodel.MODE_PAPER
    output_activation: str = seqmodel.ACT_LINEAR
    # [trainer]
    epochs: int = 200
    lr: float = 2e-3
    noise_std: float = 0.05
    l1_lambda: float = 1e-4
    seed: int = 1234
    batch: str = trainer.BATCH_PER_WINDOW
    checkpoint_interval: int = 0
    # [eval]
    n_trees: int = 100
    features: str = "activity2vec"
    fold_average: str = FOLD_POOLED
    # [output]
    out_dir: str = "out"

    def validate(self) -> None:
        if self.kind not in DATASET_KINDS:
            raise ConfigError(f"unknown dataset kind {self.kind!r}")
        if self.kind in ("casas", "har") and not self.path:
            raise ConfigError(f"dataset kind {self.kind!r} needs a path")
        if self.features not in FEATURE_SETS:
            raise ConfigError(f"unknown feature set {self.features!r}")
        if self.fold_average not in (FOLD_POOLED, FOLD_PER_FOLD):
            raise ConfigError(f"unknown fold_average {self.fold_average!r}")
        if self.k < 1 or not 1 <= self.stride <= self.k:
            raise ConfigError(f"bad window settings k={self.k}, stride={self.stride}")
        try:
            self.to_train_config().validate()
            if self.embedding_dim % 2 != 0 or self.embedding_dim < 2:
                raise ValueError(f"embedding_dim must be even and >= 2, got {self.embedding_dim}")
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_train_config(self) -> trainer.TrainConfig:
        return trainer.TrainConfig(
            epochs=self.epochs,
            lr=self.lr,
            noise_std=self.noise_std,
            l1_lambda=self.l1_lambda,
            embedding_dim=self.embedding_dim,
            mode=self.mode,
            output_activation=self.output_activation,
            seed=self.seed,
            batch=self.batch,
            checkpoint_interval=self.checkpoint_interval,
        )


_SECTIONS = {
    "dataset": ("kind", "path", "train_per_class", "test_per_class", "timesteps", "channels"),
    "window": ("k", "stride"),
    "model": ("embedding_dim", "mode", "output_activation"),
    "trainer": ("epochs", "lr", "noise_std", "l1_lambda", "seed", "batch",
                "checkpoint_interval"),
    "eval": ("n_trees", "features", "fold_average"),
    "output": ("out_dir",),
}

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _render(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def save_config(cfg: ExperimentConfig, path: str) -> None:
    lines = []
    for section, names in _SECTIONS.items():
        lines.append(f"[{section}]")
        for name in names:
            lines.append(f"{name} = {_render(getattr(cfg, name))}")
        lines.append("")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))


def load_config(path: str) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    cfg = ExperimentConfig()
    known = {name: section for section, names in _SECTIONS.items() for name in names}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}] in {path}")
        for name, raw in parser.items(section):
            if name not in known or known[name] != section:
                raise ConfigError(f"unknown key {name!r} in section [{section}] of {path}")
            setattr(cfg, name, _convert(name, raw))
    return cfg
