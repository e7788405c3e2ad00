"""
Experiment configuration.

A JSON document validated section by section; unknown keys anywhere are
rejected. Command-line flags override file values, which override defaults.
"""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from convert.conversion import ConversionMode
from dnn.training import TrainConfig
from energy.model import PRESETS
from netcore.errors import ConfigError

logger = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "SNNCAL_OUTPUT_ROOT"
LOG_LEVEL_ENV = "SNNCAL_LOG_LEVEL"
DEFAULT_OUTPUT_ROOT = "runs"


class ConfigBase(BaseModel):
    """Base for every config section: unknown keys are errors."""

    model_config = ConfigDict(extra="forbid")


class DatasetConfig(ConfigBase):
    source: Literal["blobs", "arcs", "idx"] = "blobs"
    n_samples: int = Field(2000, ge=2)
    n_classes: int = Field(4, ge=2)
    n_features: int = Field(2, ge=1)
    spread: float = Field(0.5, gt=0.0)
    noise: float = Field(0.1, ge=0.0)
    images_path: Optional[Path] = None
    labels_path: Optional[Path] = None
    test_images_path: Optional[Path] = None
    test_labels_path: Optional[Path] = None
    test_fraction: float = Field(0.2, ge=0.0, lt=1.0)
    seed: int = 0

    @model_validator(mode="after")
    def _paths_resolve(self) -> "DatasetConfig":
        if self.source == "idx":
            if self.images_path is None or self.labels_path is None:
                raise ValueError("idx datasets need images_path and labels_path")
        if (self.test_images_path is None) != (self.test_labels_path is None):
            raise ValueError("test_images_path and test_labels_path must be given together")
        for name in ("images_path", "labels_path", "test_images_path", "test_labels_path"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ValueError(f"{name} does not exist: {path}")
        return self


class ArchitectureConfig(ConfigBase):
    kind: Literal["mlp", "convnet"] = "mlp"
    hidden: List[int] = Field(default_factory=lambda: [64, 64])
    channels: List[int] = Field(default_factory=lambda: [8, 16])
    kernel: int = Field(3, ge=1)
    dropout: float = Field(0.0, ge=0.0, lt=1.0)
    mu: float = Field(1.0, gt=0.0)
    seed: int = 0

    @field_validator("hidden", "channels")
    @classmethod
    def _positive(cls, value: List[int]) -> List[int]:
        if any(v < 1 for v in value):
            raise ValueError("layer widths must be positive")
        return value


class ConversionConfig(ConfigBase):
    time_steps: int = Field(2, ge=1)
    mode: ConversionMode = ConversionMode.SCALED
    reservoir_size: int = Field(1_000_000, ge=1)
    calibration_samples: Optional[int] = Field(None, ge=1)
    absorb_beta: bool = False


class AnalysisConfig(ConfigBase):
    time_steps_sweep: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    n_resamples: int = Field(200, ge=0)
    simulate: bool = True
    seed: int = 0

    @field_validator("time_steps_sweep")
    @classmethod
    def _valid_steps(cls, value: List[int]) -> List[int]:
        if not value or any(t < 1 for t in value):
            raise ValueError("time_steps_sweep must be a non-empty list of positive integers")
        return value


class EnergyConfig(ConfigBase):
    e_mac: float = Field(3.2, gt=0.0)
    e_ac: float = Field(0.1, gt=0.0)
    presets: List[str] = Field(default_factory=lambda: sorted(PRESETS))
    eval_samples: int = Field(256, ge=1)

    @field_validator("presets")
    @classmethod
    def _known(cls, value: List[str]) -> List[str]:
        unknown = [p for p in value if p.lower() not in PRESETS]
        if unknown:
            raise ValueError(f"unknown neuromorphic presets {unknown}; choose from {sorted(PRESETS)}")
        return [p.lower() for p in value]

    @model_validator(mode="after")
    def _mac_costs_more(self) -> "EnergyConfig":
        if not self.e_mac > self.e_ac:
            raise ValueError(f"e_mac ({self.e_mac}) must exceed e_ac ({self.e_ac})")
        return self


def _snn_defaults() -> TrainConfig:
    return TrainConfig(epochs=5, learning_rate=0.005, batch_size=32, seed=1)


class ExperimentConfig(ConfigBase):
    """Complete description of one experiment run."""

    name: str = "experiment"
    seed: int = 0
    output_dir: Optional[Path] = None
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    architecture: ArchitectureConfig = Field(default_factory=ArchitectureConfig)
    dnn_training: TrainConfig = Field(default_factory=TrainConfig)
    snn_training: TrainConfig = Field(default_factory=_snn_defaults)
    conversion: ConversionConfig = Field(default_factory=ConversionConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    energy: EnergyConfig = Field(default_factory=EnergyConfig)

    def config_hash(self) -> str:
        """MD5 of the canonical (sorted-key) JSON form."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.md5(canonical.encode()).hexdigest()


def _validate(payload: Dict[str, Any], origin: str) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"Invalid configuration in {origin}: {problems}") from e


def load_config(path: Optional[Path] = None) -> ExperimentConfig:
    """
    Load and validate an experiment config (defaults when ``path`` is None).

    Raises:
        ConfigError: If the file is missing, not JSON, or fails validation
    """
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(payload, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return _validate(payload, str(path))


def apply_overrides(cfg: ExperimentConfig, time_steps: Optional[int] = None, mode: Optional[str] = None,
                    seed: Optional[int] = None, output_dir: Optional[Path] = None,
                    epochs: Optional[int] = None, snn_epochs: Optional[int] = None) -> ExperimentConfig:
    """
    Return a copy of ``cfg`` with command-line values taking precedence.

    ``seed`` is the master seed: it also reseeds the data, initialisation and
    both training phases.
    """
    payload = cfg.model_dump(mode="json")
    if time_steps is not None:
        payload["conversion"]["time_steps"] = time_steps
    if mode is not None:
        payload["conversion"]["mode"] = mode
    if seed is not None:
        payload["seed"] = seed
        payload["dataset"]["seed"] = seed
        payload["architecture"]["seed"] = seed
        payload["dnn_training"]["seed"] = seed
        payload["snn_training"]["seed"] = seed + 1
        payload["analysis"]["seed"] = seed
    if output_dir is not None:
        payload["output_dir"] = str(output_dir)
    if epochs is not None:
        payload["dnn_training"]["epochs"] = epochs
    if snn_epochs is not None:
        payload["snn_training"]["epochs"] = snn_epochs
    return _validate(payload, "command-line overrides")


def resolve_output_dir(cfg: ExperimentConfig) -> Path:
    """Configured output dir, else ``$SNNCAL_OUTPUT_ROOT/<name>_<hash>``."""
    if cfg.output_dir is not None:
        return Path(cfg.output_dir)
    root = Path(os.getenv(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT_ROOT))
    return root / f"{cfg.name}_{cfg.config_hash()[:8]}"
