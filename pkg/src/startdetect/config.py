"""Declarative run configuration shared by the CLI subcommands.

One YAML document configures every stage; unknown keys are rejected so a
typo cannot silently fall back to a default. Each stage writes the
resolved configuration next to its outputs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path

import yaml

from .evaluation import DetectorConfig
from .features import FeatureSpec
from .model import TrainConfig
from .selection import SelectionConfig
from .synth import SynthConfig


class ConfigError(ValueError):
    pass


@dataclass
class NetworkConfig:
    variant: str = "small"
    input_window: int = 50
    keep_prob: float = 0.6


@dataclass
class EvaluateConfig:
    k_folds: int = 5
    thresholds: list[float] = field(
        default_factory=lambda: [round(0.1 * i, 2) for i in range(1, 10)])


@dataclass
class Experiment:
    name: str
    features: str = "filter"
    variant: str = "small"
    input_window: int = 50
    keep_prob: float = 0.6


@dataclass
class ReportConfig:
    k_folds: int = 5
    experiments: list[Experiment] = field(default_factory=lambda: [
        Experiment(name="filter-w50", features="filter", input_window=50),
        Experiment(name="filter-w10", features="filter", input_window=10),
        Experiment(name="raw4-w50", features="raw4", input_window=50),
    ])


@dataclass
class RunConfig:
    seed: int = 0
    synth: SynthConfig = field(default_factory=SynthConfig)
    features: FeatureSpec = field(default_factory=FeatureSpec)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    evaluate: EvaluateConfig = field(default_factory=EvaluateConfig)
    report: ReportConfig = field(default_factory=ReportConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    def resolved_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def _build_dataclass(cls, doc: dict, path: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(doc).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(doc) - set(known))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    kwargs = {}
    for name, value in doc.items():
        f = known[name]
        if f.default is not dataclasses.MISSING:
            current = f.default
        elif f.default_factory is not dataclasses.MISSING:
            current = f.default_factory()
        else:  # required field (no default): pass the value through
            current = None
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            kwargs[name] = _build_dataclass(type(current), value,
                                            f"{path}.{name}")
        elif isinstance(current, tuple) and isinstance(value, list):
            kwargs[name] = tuple(value)
        elif name == "experiments" and isinstance(value, list):
            kwargs[name] = [_build_dataclass(Experiment, e,
                                             f"{path}.experiments[{i}]")
                            for i, e in enumerate(value)]
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path: str | Path | None) -> RunConfig:
    """Load a RunConfig from YAML; None yields all defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if doc is None:
        return RunConfig()
    return _build_dataclass(RunConfig, doc, str(path))
