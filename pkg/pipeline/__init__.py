"""
Pipeline Package - experiment configuration, stage runner and run manifest.
"""

from .config import (
    OUTPUT_ROOT_ENV,
    LOG_LEVEL_ENV,
    DatasetConfig,
    ArchitectureConfig,
    ConversionConfig,
    AnalysisConfig,
    EnergyConfig,
    ExperimentConfig,
    load_config,
    apply_overrides,
    resolve_output_dir,
)

from .schemas import RunManifest, StageRecord, EvaluationMetrics

from .runner import ExperimentRunner

__all__ = [
    # Configuration
    "OUTPUT_ROOT_ENV",
    "LOG_LEVEL_ENV",
    "DatasetConfig",
    "ArchitectureConfig",
    "ConversionConfig",
    "AnalysisConfig",
    "EnergyConfig",
    "ExperimentConfig",
    "load_config",
    "apply_overrides",
    "resolve_output_dir",
    # Schemas
    "RunManifest",
    "StageRecord",
    "EvaluationMetrics",
    # Runner
    "ExperimentRunner",
]
