"""Exception hierarchy shared by every module; the CLI maps each class to an exit code."""


class ExpBasisError(Exception):
    exit_code = 1


class ValidationError(ExpBasisError, ValueError):
    """Malformed domain, parameter outside its admissible range, dimension mismatch."""

    exit_code = 2


class ResourceError(ExpBasisError):
    """A grid, matrix or enumeration would exceed its configured budget."""

    exit_code = 3


class NumericalError(ExpBasisError, ArithmeticError):
    """An iterative solver stopped before reaching its tolerance.

    ``partial`` carries whatever estimate was available when it gave up.
    """

    exit_code = 4

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
