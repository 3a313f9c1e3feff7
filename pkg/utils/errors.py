"""
Error hierarchy for DotFoundry.

Analysis functions raise these; only the CLI turns them into exit codes.
"""

from typing import Any, Optional


class DotFoundryError(Exception):
    """Base class for all DotFoundry errors."""


class DomainError(DotFoundryError, ValueError):
    """A parameter lies outside its declared domain."""

    def __init__(self, message: str, parameter: Optional[str] = None):
        super().__init__(message)
        self.parameter = parameter


class ArgumentError(DotFoundryError, ValueError):
    """Invalid arguments (empty grid, bad distribution, bad budget element)."""


class BoundsError(ArgumentError):
    """Geometry lies outside the frame or scene bounds."""


class DegenerateDataError(ArgumentError):
    """Data carry no information to start a fit from (flat data)."""


class InfeasibleTargetError(ArgumentError):
    """A design target that no pillar radius can reach."""


class DegenerateFitError(DotFoundryError):
    """The normal matrix J^T W J is singular at the solution."""


class FitFailure(DotFoundryError):
    """A fit did not converge; the partial result is attached."""

    def __init__(self, message: str, fit: Any = None):
        super().__init__(message)
        self.fit = fit


class DegenerateCalibrationError(DotFoundryError):
    """Two calibration marks are too close to define a pixel scale."""


class DegenerateHistogramError(DotFoundryError):
    """A coincidence histogram has no counts in its side peaks."""


class StageError(DotFoundryError):
    """A localization pipeline stage failed."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class DataFormatError(DotFoundryError):
    """A frame, CSV or JSON file could not be parsed."""

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line: Optional[int] = None,
        offset: Optional[int] = None,
    ):
        location = ""
        if line is not None:
            location = f" (line {line})"
        elif offset is not None:
            location = f" (byte offset {offset})"
        prefix = f"{path}: " if path else ""
        super().__init__(f"{prefix}{message}{location}")
        self.path = path
        self.line = line
        self.offset = offset


class ConfigError(DotFoundryError):
    """Invalid run configuration; names the offending field."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
