"""Exception hierarchy shared by every module."""


class SysAliasError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SysAliasError, ValueError):
    """Malformed or out-of-contract input."""


class BranchUndefinedError(InvalidInputError):
    """Principal logarithm does not exist (eigenvalue on the closed negative real axis)."""


class UnsupportedDegenerateError(InvalidInputError):
    """Repeated eigenvalues where distinct ones are required."""


class InvalidProbeError(InvalidInputError):
    """Probe sampling period is an integer multiple of the model period."""


class InvalidDirectionError(InvalidInputError):
    """Search direction is not a descent direction."""


class CSVParseError(InvalidInputError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NumericFailure(SysAliasError, ArithmeticError):
    """An iteration failed to converge or produced non-finite values."""


class SolverFailure(NumericFailure):
    """The QP solver did not reach its tolerance within the iteration cap."""


class GenerationFailure(SysAliasError, RuntimeError):
    """Random system generation exhausted its retry budget."""
