"""Exception hierarchy shared by the library and the CLI.

CLI exit codes: 0 ok, 2 configuration problems (ConfigError and
subclasses), 3 numeric/training failures (NumericError, TrainingError).
"""


class ConfigError(ValueError):
    """Invalid configuration, dimension mismatch, or unusable input."""


class StalenessError(ConfigError):
    """An on-disk artifact was produced under a different configuration."""


class DomainError(ConfigError):
    """A parameter value lies outside the problem's parameter domain."""


class NumericError(RuntimeError):
    """A numerical procedure failed (non-convergence, non-finite values)."""


class TrainingError(NumericError):
    """Training diverged or produced a non-finite loss/gradient."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message if epoch is None else f"{message} (epoch {epoch})")
        self.epoch = epoch


class ZeroReferenceError(ValueError):
    """Relative error is undefined because the reference has zero norm."""
