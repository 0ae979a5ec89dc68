"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration: bad sizes, ranges, or option values."""


class DataError(ValueError):
    """Input data violates the expected schema or cannot be used."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")
