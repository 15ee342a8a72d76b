"""Exception hierarchy shared by the library and the CLI.

Each class carries the CLI exit code it maps to.
"""


class SpecDemuxError(Exception):
    exit_code = 2


class UsageError(SpecDemuxError, ValueError):
    """Bad arguments or an empty request."""

    exit_code = 1


class DataFormatError(SpecDemuxError, ValueError):
    """Malformed file, schema violation or invalid field value."""

    exit_code = 2


class DimensionError(DataFormatError):
    """Grid or channel count mismatch between operands."""


class NumericalError(SpecDemuxError, ArithmeticError):
    exit_code = 3


class ConditioningError(NumericalError):
    """Linear system too ill-conditioned to solve."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class DivisionHazardError(NumericalError):
    """Reference bin too dark to divide by."""

    def __init__(self, message, wavelengths_nm=()):
        super().__init__(message)
        self.wavelengths_nm = tuple(wavelengths_nm)


class ExperimentError(SpecDemuxError):
    """A harness stage failed; ``stage`` names it and ``__cause__`` holds the original error."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 2)
