"""Flat ``key = value`` run configuration with section-prefixed keys.

A config file looks like::

    paths.corpus = data/toy/corpus.tsv
    retrieval.mu = 1500
    train.objective = likelihood

Command-line ``--set key=value`` overrides file values; the resolved
configuration is echoed into each command's manifest so a run can be
reproduced from its artifacts alone.
"""

from __future__ import annotations

import os

from .errors import ConfigError

DEFAULTS: dict[str, str] = {
    "corpus.min_cf": "1",
    "corpus.workers": "1",
    "retrieval.mu": "1500",
    "retrieval.k": "10",
    "search.k": "1000",
    "rm.max_terms": "",
    "train.objective": "likelihood",
    "train.dim": "300",
    "train.learning_rate": "0.1",
    "train.batch_size": "64",
    "train.epochs": "5",
    "train.eta_pos": "20",
    "train.eta_neg_mult": "10",
    "train.seed": "42",
    "train.workers": "1",
    "train.use_bias": "false",
    "train.lr_decay": "false",
    "train.target_samples": "0",
    "expand.alpha": "0.5",
    "expand.num_terms": "10",
    "expand.alpha_grid": "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9",
    "expand.m_grid": "10,20,30,40,50,60,70,80,90,100",
    "expand.folds": "2",
    "expand.dump_runs": "false",
    "eval.cutoff": "1000",
    "classify.top_t": "1",
    "classify.folds": "5",
    "classify.seed": "42",
    "classify.macro": "false",
}


class RunConfig:
    """Resolved configuration: defaults, then file values, then overrides."""

    def __init__(self, values: dict[str, str] | None = None):
        self.values = dict(DEFAULTS)
        if values:
            self.values.update(values)

    @classmethod
    def load(cls, path: str | None, overrides: list[str] | None = None) -> "RunConfig":
        values: dict[str, str] = {}
        if path is not None:
            values.update(parse_config_file(path))
        cfg = cls(values)
        for item in overrides or []:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not of the form key=value")
            key, _, value = item.partition("=")
            cfg.values[key.strip()] = value.strip()
        return cfg

    def get(self, key: str, default: str | None = None) -> str:
        if key in self.values:
            return self.values[key]
        if default is not None:
            return default
        raise ConfigError(f"missing config key {key!r}")

    def get_int(self, key: str) -> int:
        try:
            return int(self.get(key))
        except ValueError as exc:
            raise ConfigError(f"config key {key!r} is not an integer") from exc

    def get_float(self, key: str) -> float:
        try:
            return float(self.get(key))
        except ValueError as exc:
            raise ConfigError(f"config key {key!r} is not a number") from exc

    def get_bool(self, key: str) -> bool:
        value = self.get(key).lower()
        if value in ("true", "1", "yes", "on"):
            return True
        if value in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"config key {key!r} is not a boolean: {value!r}")

    def get_optional_int(self, key: str) -> int | None:
        value = self.get(key, default="")
        return int(value) if value else None

    def get_floats(self, key: str) -> list[float]:
        items = [v for v in self.get(key).split(",") if v.strip()]
        if not items:
            raise ConfigError(f"config key {key!r} holds an empty grid")
        return [float(v) for v in items]

    def get_ints(self, key: str) -> list[int]:
        items = [v for v in self.get(key).split(",") if v.strip()]
        if not items:
            raise ConfigError(f"config key {key!r} holds an empty grid")
        return [int(v) for v in items]

    def get_path(self, key: str) -> str:
        path = self.get(key)
        if not os.path.exists(path):
            raise FileNotFoundError(f"config key {key!r}: no such path: {path}")
        return path


def parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as f:
            for line_no, line in enumerate(f, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


def write_manifest(path: str, command: str, cfg: RunConfig, extra: dict[str, str]) -> None:
    """Echo the resolved config plus command-specific counters, sorted."""
    lines = {f"config.{k}": v for k, v in cfg.values.items()}
    lines["command"] = command
    lines.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        for key in sorted(lines):
            f.write(f"{key} = {lines[key]}\n")
