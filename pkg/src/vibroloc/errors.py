"""Exception types shared across the package."""


class ManifestError(ValueError):
    """Malformed manifest / NDJSON input. Carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class CheckpointError(ValueError):
    """Checkpoint file is corrupt (header/payload mismatch, truncation, bad magic)."""


class ConfigMismatchError(CheckpointError):
    """Checkpoint holds a different model configuration than the one requested."""


class NumericError(ArithmeticError):
    """Non-finite values encountered where finite numbers are required."""
