"""
Exception hierarchy for nirenberg-s3.

Every error raised on purpose by the library derives from NirenbergError so
that the command layer can map it onto an exit code.
"""

from typing import Any, List, Optional


class NirenbergError(Exception):
    """Base class for all library errors."""


class ConfigError(NirenbergError):
    """Bad configuration file, unknown key, or unparsable K expression."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column or 1})"
        super().__init__(message)


class DomainError(NirenbergError):
    """Input outside the domain of an operation (north pole, coincident points, K <= 0)."""


class PreconditionError(NirenbergError):
    """A documented precondition of an operation does not hold."""


class ResourceBudgetError(NirenbergError):
    """A grid or matrix would exceed the configured memory budget."""

    def __init__(self, message: str, required: int):
        self.required = required
        super().__init__(message)


class DegenerateKError(NirenbergError):
    """K is not a Morse function (degenerate critical point) or has no Morse structure."""

    def __init__(self, message: str, records: Optional[List[Any]] = None):
        self.records = records or []
        super().__init__(message)


class ResolutionError(NirenbergError):
    """A concentration scale is beyond what the quadrature or band limit can resolve."""

    def __init__(self, message: str, required_order: Optional[int] = None):
        self.required_order = required_order
        super().__init__(message)


class IntegrationError(NirenbergError):
    """Quadrature failed to converge."""


class InfeasibleConfigurationError(NirenbergError):
    """mu(M) <= 0: the reduced functional has no interior minimum."""


class NumericError(NirenbergError):
    """An iteration failed to converge; carries the iteration trace."""

    def __init__(self, message: str, trace: Optional[List[Any]] = None):
        self.trace = trace or []
        super().__init__(message)


class FitError(NirenbergError):
    """Bubble decomposition hit a rank-deficient Gram matrix."""


class BifurcationSuspectError(NirenbergError):
    """The PDE Jacobian is singular within tolerance."""


class PositivityError(NirenbergError):
    """A converged iterate is not positive on the grid."""

    def __init__(self, message: str, state: Any = None):
        self.state = state
        super().__init__(message)
