"""Exception hierarchy shared by every module."""


class MotorPoseError(Exception):
    """Base class for all errors raised by motorpose."""


class ValidationError(MotorPoseError, ValueError):
    """An input violates a documented invariant (non-unit, non-finite, ...)."""


class DegeneratePointError(MotorPoseError):
    """A sphere point sits at the antipode of the origin (the point at infinity)."""


class InvalidMotorError(MotorPoseError):
    """A multivector cannot act as a rigid motion (sandwich leaves grade 1)."""


class ParseError(MotorPoseError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, *, source=None, line=None):
        self.source = source
        self.line = line
        where = ""
        if source is not None:
            where += f"{source}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class InputError(MotorPoseError, ValueError):
    """Inconsistent inputs, e.g. mismatched frame ids between two files."""

    def __init__(self, message, offenders=()):
        self.offenders = list(offenders)
        super().__init__(message)
