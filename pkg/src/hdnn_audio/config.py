"""Declarative run configuration: YAML file + dotted-path overrides,
validated strictly (unknown keys rejected) before any work starts."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path

import yaml

from .errors import ConfigError


@dataclass
class FeatureConfig:
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    num_ceps: int = 13


@dataclass
class ContextSection:
    width: int = 49
    dct_enabled: bool = True
    dct_keep_per_band: int = 33


@dataclass
class ScheduleSection:
    initial_lr: float = 0.002
    ramp_improvement_threshold: float = 0.5
    stop_improvement_threshold: float = 0.1
    minibatch_frames: int = 1024
    cv_fraction: float = 0.10
    max_epochs: int = 50
    min_epochs: int = 0


@dataclass
class NetworkSection:
    hidden_dims: list[int] = field(default_factory=lambda: [2000, 2000, 2000])
    schedule: ScheduleSection = field(default_factory=ScheduleSection)


@dataclass
class Stage2Section:
    hidden_dims: list[int] = field(default_factory=lambda: [1000, 1000])
    schedule: ScheduleSection = field(default_factory=ScheduleSection)


@dataclass
class PretrainSection:
    enabled: bool = True
    gb_lr: float = 0.005
    gb_epochs: int = 10
    bb_lr: float = 0.05
    bb_epochs: int = 5
    minibatch: int = 1024


@dataclass
class GmmSection:
    num_components: int = 256
    iterations: int = 20
    feature_mode: str = "delta42"  # or "stacked"
    stacked_width: int = 5


@dataclass
class SynthSection:
    num_concepts: int = 8
    clips_per_concept: int = 26
    clip_seconds_min: float = 1.2
    clip_seconds_max: float = 2.0
    sample_rate: int = 16000
    noise_db: float = -30.0


@dataclass
class PathsSection:
    corpus_dir: str = "corpus"
    out_dir: str = "runs/run"


@dataclass
class RunConfig:
    seed: int = 0
    train_fraction: float = 0.8
    sparse_offsets: list[int] = field(default_factory=lambda: [-10, -5, 0, 5, 10])
    paths: PathsSection = field(default_factory=PathsSection)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    context: ContextSection = field(default_factory=ContextSection)
    nn: NetworkSection = field(default_factory=NetworkSection)
    stage2: Stage2Section = field(default_factory=Stage2Section)
    pretrain: PretrainSection = field(default_factory=PretrainSection)
    gmm: GmmSection = field(default_factory=GmmSection)
    synth: SynthSection = field(default_factory=SynthSection)


def _from_dict(cls, data, path="config"):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = known[name]
        if is_dataclass(f.type) or (isinstance(f.type, str) and f.type in _SECTIONS):
            sub_cls = _SECTIONS[f.type] if isinstance(f.type, str) else f.type
            kwargs[name] = _from_dict(sub_cls, value, f"{path}.{name}")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


_SECTIONS = {cls.__name__: cls for cls in
             (FeatureConfig, ContextSection, ScheduleSection, NetworkSection,
              Stage2Section, PretrainSection, GmmSection, SynthSection,
              PathsSection)}


def load_config(path=None, overrides: list[str] | None = None) -> RunConfig:
    """Load a YAML config (defaults when path is None) and apply
    ``key.path=value`` overrides."""
    data = {}
    if path is not None:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a scalar")
        node[parts[-1]] = yaml.safe_load(raw)
    return _from_dict(RunConfig, data)


def config_to_dict(config: RunConfig) -> dict:
    return dataclasses.asdict(config)


def fingerprint(config: RunConfig) -> str:
    """Short stable hash of every hyperparameter, for reproducibility audits."""
    canonical = json.dumps(config_to_dict(config), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def write_snapshot(config: RunConfig, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.yaml", "w") as f:
        yaml.safe_dump(config_to_dict(config), f, sort_keys=False)
    (out_dir / "fingerprint.txt").write_text(fingerprint(config) + "\n")
