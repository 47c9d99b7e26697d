"""Exception hierarchy shared by all modules."""


class RelaxctlError(Exception):
    """Base class for errors raised by relaxctl."""


class InputError(RelaxctlError, ValueError):
    """Malformed input: shapes, grids, configs, or evaluator failures."""


class PreconditionError(InputError):
    """A documented precondition of an operation does not hold."""


class DivergenceError(RelaxctlError, ArithmeticError):
    """A non-finite value appeared during integration."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NormalityError(RelaxctlError):
    """Chattering synthesis requested without a normal certificate."""
