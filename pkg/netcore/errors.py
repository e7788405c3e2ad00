"""
Error hierarchy shared by every package.

Each class carries the exit code the command-line driver reports for it.
"""


class SnnCalError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(SnnCalError):
    """Invalid experiment configuration or unresolvable path."""

    exit_code = 2


class TrainingError(SnnCalError):
    """Training diverged (the loss became non-finite)."""

    exit_code = 3

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message if epoch is None else f"{message} (epoch {epoch})")
        self.epoch = epoch


class ArtifactError(SnnCalError):
    """Unreadable, corrupted or mutually inconsistent artifact files."""

    exit_code = 4


class MismatchError(SnnCalError):
    """Requested time steps disagree with the conversion plan."""

    exit_code = 5


class InsufficientSamplesError(SnnCalError, ValueError):
    """An estimator was invoked with fewer samples than its floor."""

    exit_code = 6


class DimensionError(SnnCalError, ValueError):
    """Tensor shapes or layer geometry do not compose."""


class StatsError(SnnCalError, ValueError):
    """Activation statistics could not be collected."""


class CalibrationError(SnnCalError, ValueError):
    """Threshold/scale calibration could not be performed."""

    exit_code = 4


class EstimationError(SnnCalError, ValueError):
    """A distributional estimate is undefined for the given samples."""

    exit_code = 6


class ArgumentError(SnnCalError, ValueError):
    """An argument is outside its documented domain."""


class EnergyConfigError(ConfigError, ValueError):
    """Unknown energy-model preset."""
