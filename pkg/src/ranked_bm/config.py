"""YAML experiment configuration.

A config file has the sections ``spec``, ``initial``, ``sim``, ``analysis``
and ``output``; every section mirrors the corresponding type and unknown
keys anywhere are rejected.  ``ExperimentConfig.to_dict`` produces a dict
that parses back to an identical config.  Example::

    spec:
      size: 5
      drifts: [1, 0, 0, 0, 0]
      diffusions: 1.0
      collisions: symmetric
    initial: stationary
    sim: {dt: 0.001, T: 550, burn_in: 50, seed: 7, boundary: bridge}
    analysis: {targets: [gap_stats]}
    output: {dir: out, format: csv}
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError, RankedBMError
from .model import InitialConfig, SystemSpec
from .simulate import SimConfig

__all__ = [
    "AnalysisConfig", "OutputConfig", "ExperimentConfig", "load_config",
    "parse_config", "dump_config", "STATIONARY", "TARGETS", "FORMATS",
]

STATIONARY = "stationary"
TARGETS = ("trajectory", "gap_stats", "histogram")
FORMATS = ("csv", "json", "binary")
STARTS = ("dominating", "stationary", "custom")


def _strict(cls, d, section):
    if not isinstance(d, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(extra)}")
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigError(f"{section}: {exc}") from None


@dataclass(frozen=True)
class AnalysisConfig:
    """Which reports to emit and the parameters of each subcommand."""

    targets: tuple = ("gap_stats",)
    N: int | None = None
    ladder: tuple | None = None
    inequality: str = "gaps_le"
    threshold: float = 0.01
    start: str = "dominating"
    factor: float = 2.0
    checkpoints: tuple = (5.0, 25.0, 100.0)
    custom_start: tuple | None = None
    K: int = 3
    deltas: tuple | None = None
    dts: tuple | None = None

    def __post_init__(self):
        for name in ("targets", "ladder", "checkpoints", "custom_start", "deltas", "dts"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(v))
        bad = set(self.targets) - set(TARGETS)
        if bad:
            raise ConfigError(f"unknown analysis targets {sorted(bad)}")
        if self.start not in STARTS:
            raise ConfigError(f"start must be one of {STARTS}")
        if self.start == "custom" and self.custom_start is None:
            raise ConfigError("start: custom needs custom_start gaps")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    format: str = "csv"

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")

    def to_dict(self) -> dict:
        return {"dir": self.dir, "format": self.format}


@dataclass(frozen=True)
class ExperimentConfig:
    """``initial`` is an :class:`InitialConfig`, the marker ``"stationary"``
    (gaps drawn from the finite stationary law) or None."""

    spec: SystemSpec
    sim: SimConfig
    initial: InitialConfig | str | None = None
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        if isinstance(self.initial, InitialConfig):
            initial = self.initial.to_dict()
        else:
            initial = self.initial
        return {
            "spec": self.spec.to_dict(),
            "initial": initial,
            "sim": self.sim.to_dict(),
            "analysis": self.analysis.to_dict(),
            "output": self.output.to_dict(),
        }

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def parse_config(d) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a mapping")
    extra = set(d) - {"spec", "initial", "sim", "analysis", "output"}
    if extra:
        raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
    for key in ("spec", "sim"):
        if key not in d:
            raise ConfigError(f"missing section {key!r}")
    try:
        spec = SystemSpec.from_dict(d["spec"])
    except (KeyError, TypeError, ValueError, RankedBMError) as exc:
        raise ConfigError(f"spec: {exc}") from None
    initial = d.get("initial")
    if isinstance(initial, dict):
        try:
            initial = InitialConfig.from_dict(initial)
        except (KeyError, TypeError, ValueError, RankedBMError) as exc:
            raise ConfigError(f"initial: {exc}") from None
    elif initial not in (None, STATIONARY):
        raise ConfigError(f"initial must be a mapping, {STATIONARY!r} or absent")
    return ExperimentConfig(
        spec=spec,
        sim=_strict(SimConfig, d["sim"], "sim"),
        initial=initial,
        analysis=_strict(AnalysisConfig, d.get("analysis") or {}, "analysis"),
        output=_strict(OutputConfig, d.get("output") or {}, "output"),
    )


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from None
    return parse_config(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
