"""Exception types shared across the package."""


class VoltsizerError(Exception):
    """Base class for all package errors."""


class NoConvergence(VoltsizerError):
    """Power-flow iteration failed within the iteration cap.

    Signals an operating point outside the solvable regime (e.g. excessive
    load). Carries optional replay context on ``position`` and
    ``partial_report``.
    """

    def __init__(self, message, position=None, partial_report=None):
        super().__init__(message)
        self.position = position
        self.partial_report = partial_report


class StabilityViolation(VoltsizerError):
    """1 - 2*x*f0*C <= 0: added capacitance would no longer raise voltage."""


class ParseError(VoltsizerError):
    """Malformed trace or config input; message names the offending row/key."""


class EmptyTrace(VoltsizerError):
    """Trace file or sequence contains no samples."""


class InsufficientData(VoltsizerError):
    """Not enough stages to estimate a transition model."""


class ConfigError(VoltsizerError):
    """Inconsistent or unusable configuration values."""


class NoFeasibleSizes(VoltsizerError):
    """Sizing search exhausted without a finite-cost point.

    Usually means delta/epsilon/circuit parameters are mutually inconsistent
    or the search budget is far too small.
    """
