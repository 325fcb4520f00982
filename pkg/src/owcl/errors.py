"""Exception types raised by the engine.

Every malformed input or contract violation maps to one of these, so callers
(CLI, HTTP service, tests) can distinguish validation failures from runtime
failures without string matching.
"""


class OwclError(Exception):
    """Base class for all engine errors."""


class FormatError(OwclError, ValueError):
    """A dataset file violates the text format. Carries the offending line."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class DimensionMismatchError(OwclError, ValueError):
    """Vector or matrix shape does not match the expected dimension."""


class OpenLabelError(OwclError, ValueError):
    """The open marker appeared where only known class labels are allowed."""


class MissingPrototypeError(OwclError, ValueError):
    """A batch references a class with no prototype in the state."""


class NoClassesError(OwclError, ValueError):
    """An operation requires at least one trained class."""


class NotEnoughClassesError(OwclError, ValueError):
    """Pseudo-sample calibration needs at least two trained classes."""


class UncalibratedError(OwclError, ValueError):
    """Classification requested before any threshold calibration ran."""


class CalibrationError(OwclError, ValueError):
    """Threshold calibration could not run; the previous threshold stands."""


class IllConditionedError(OwclError, ValueError):
    """The ridge system's condition estimate exceeds the safe bound."""


class StateFileError(OwclError, ValueError):
    """A model-state file has a wrong magic/version or is corrupt."""


class ConfigError(OwclError, ValueError):
    """A run or scenario configuration violates its invariants."""
