"""Exception hierarchy shared across the toolchain."""


class FingertrainError(Exception):
    """Base class for all errors raised by this package."""


class SmilesParseError(FingertrainError):
    """Malformed SMILES input (syntax, ring bonds, unknown elements, valence)."""

    def __init__(self, message: str, smiles: str = "", position: int | None = None):
        self.smiles = smiles
        self.position = position
        where = f" at position {position}" if position is not None else ""
        suffix = f" in {smiles!r}" if smiles else ""
        super().__init__(f"{message}{where}{suffix}")


class SanitizeError(FingertrainError):
    """Graph failed chemical sanitisation (valence or aromaticity)."""


class ConfigError(FingertrainError):
    """Invalid run configuration or incompatible artifact metadata."""


class DataError(FingertrainError):
    """Invalid or inconsistent dataset contents."""


class UndefinedMetricError(FingertrainError):
    """Metric is mathematically undefined on the given inputs."""


class GradientError(FingertrainError):
    """Backward pass requested through an unrecorded tensor."""


class StageError(FingertrainError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {message}")
