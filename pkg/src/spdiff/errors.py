"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad configuration, parameters or input data."""


class GuardError(ValidationError):
    """Integration step too coarse for the configured gain."""


class CornerError(ValidationError):
    """Derivative requested exactly at a corner instant.

    The signal's corner metadata carries the one-sided slopes.
    """


class CsvParseError(ValidationError):
    """Malformed CSV input; message carries the 1-based line number."""


class DivergenceError(RuntimeError):
    """State left the finite/bounded region during integration."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"state diverged or became non-finite at t={t:.12g}")
