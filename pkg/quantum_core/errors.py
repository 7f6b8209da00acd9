"""
SpinLoop - Errors
=================
Exception hierarchy shared by every SpinLoop package.

Each error class carries the process exit code the command line
returns when the error reaches it:
- 2: bad input (dimensions, invariants, schemas, malformed protocols)
- 3: an algorithm did not converge
- 4: a resource cap was hit
"""

from typing import Optional


class SpinLoopError(Exception):
    """Base class for all SpinLoop errors"""
    exit_code = 1


class DimensionError(SpinLoopError):
    """Operator/state dimensions do not fit together"""
    exit_code = 2


class ValidationError(SpinLoopError):
    """A value violates an invariant of its type"""
    exit_code = 2


class SchemaError(SpinLoopError):
    """
    An input file does not match its JSON schema.

    Args:
        message: Human readable diagnostic
        field: Dotted path of the offending field, e.g. "controls[1].entries"
        line: Line number for JSON syntax errors
    """
    exit_code = 2

    def __init__(self, message: str, field: str = "", line: Optional[int] = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ProtocolError(SpinLoopError):
    """A protocol is malformed or used where it is not allowed"""
    exit_code = 2


class DecompositionError(SpinLoopError):
    """An eigendecomposition failed to converge"""
    exit_code = 3


class ClosureNotStabilizedError(SpinLoopError):
    """The commutator closure hit max_generations while still growing"""
    exit_code = 3

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class BranchCapExceededError(SpinLoopError):
    """Trajectory enumeration produced more branches than allowed"""
    exit_code = 4
