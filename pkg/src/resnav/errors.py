"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when a config file, world file, or parameter set is invalid."""


class UsageError(RuntimeError):
    """Raised when an operation is called in a state it does not support."""


class TrainingDiverged(RuntimeError):
    """Raised when a training update produces a non-finite loss."""

    def __init__(self, message: str, diagnostics: dict | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}
