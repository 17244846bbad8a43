"""
Exception types raised by transdim.

Most derive from the builtin they refine (ValueError / RuntimeError) so callers
that only catch builtins keep working.
"""

from typing import Mapping, Optional, Sequence


class TransdimError(Exception):
    """Base class for every transdim-specific error."""


class ContractViolation(TransdimError, ValueError):
    """An operation was called with arguments that break its preconditions."""


class ConfigError(TransdimError, ValueError):
    """Invalid run configuration; ``field`` holds the dotted path when known."""

    def __init__(self, message: str, field: Optional[str] = None,
                 unknown_keys: Sequence[str] = ()):
        self.field = field
        self.unknown_keys = list(unknown_keys)
        if field and not message.startswith(field):
            message = f"{field}: {message}"
        super().__init__(message)


class EvaluationError(TransdimError, ValueError):
    """A log-density could not be evaluated for the given data."""


class StartupError(TransdimError, RuntimeError):
    """The initial state of a chain could not be evaluated."""

    def __init__(self, message: str, model_index: Optional[int] = None):
        self.model_index = model_index
        super().__init__(message)


class CalibrationError(TransdimError, RuntimeError):
    """A centering calibration had no solution."""

    def __init__(self, message: str, residuals: Optional[Mapping[str, float]] = None):
        self.residuals = dict(residuals or {})
        if self.residuals:
            detail = ", ".join(f"{k}={v:.3g}" for k, v in self.residuals.items())
            message = f"{message} (residuals: {detail})"
        super().__init__(message)


class DegenerateSplitError(TransdimError, ValueError):
    """Split variables on the boundary of (0, 1)."""


class MoveAborted(TransdimError):
    """A between-model move could not be proposed; counts as a rejection."""


class UndefinedEstimateError(TransdimError, ValueError):
    """An estimator has no defined value for the supplied output."""
