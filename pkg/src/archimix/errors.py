"""Exception types shared across the package.

Each carries the process exit code the command-line front end maps it to.
"""


class DataError(Exception):
    """Malformed or unusable input data."""

    exit_code = 3


class CapacityError(DataError):
    """A requested computation exceeds a configured size cap."""


class NumericDegeneracyError(ArithmeticError):
    """A quantity that must be strictly positive collapsed at floating precision."""

    exit_code = 4


class InvariantViolationError(NumericDegeneracyError):
    """A structural invariant failed badly enough to signal a broken model."""


class ConvergenceError(RuntimeError):
    """An iterative solve exhausted its iteration budget."""

    exit_code = 5
